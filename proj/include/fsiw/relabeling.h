/*
 * Copyright 2026 The FSIW Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Artificial datasets for importance weight estimation.
//
// The training log is replayed as if it had been collected `tau` seconds
// earlier (the counterfactual deadline T - tau). Clicks after the deadline
// are dropped. Every remaining click gets an S label telling whether its
// label at the deadline agrees with its label at T:
//
//   D1 (converted by T):   s = 1 iff converted strictly before T - tau.
//   D0 (negative at T - tau): y = 0 clicks with s = 1, plus the y = 1 clicks
//                          that converted at or after T - tau with s = 0.
//
// Samples carry e_adj = e - tau for training and the original e for
// prediction.

#ifndef FSIW_RELABELING_H_
#define FSIW_RELABELING_H_

#include <iosfwd>
#include <span>
#include <vector>

#include "fsiw/core_data.h"

namespace fsiw {

struct RelabelConfig {
  Duration tau = 7 * kDay;
  Timestamp training_end = 0;
  // Length of the training window. When > 0, tau must be below it.
  Duration window = 0;

  void Validate() const;
};

enum class Destination { kD1, kD0 };

struct ArtificialSample {
  FeatureVector x;
  Duration e_adj = 0;
  Duration e = 0;
  int s = 0;
  Destination destination = Destination::kD1;
  std::size_t source = 0;
};

struct ArtificialDatasets {
  std::vector<ArtificialSample> d1;
  std::vector<ArtificialSample> d0;
};

// Throws ConfigError when cfg is invalid and Error when a sample was clicked
// at or after cfg.training_end.
ArtificialDatasets BuildArtificialDatasets(std::span<const LabeledSample> train,
                                           const RelabelConfig& cfg);

// TSV dump: source, destination, s, e, e_adj.
void WriteArtificial(std::ostream& out, std::span<const ArtificialSample> rows);

}  // namespace fsiw

#endif  // FSIW_RELABELING_H_
