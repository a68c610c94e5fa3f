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

#include "fsiw/relabeling.h"

#include <ostream>
#include <string>

#include "fsiw/errors.h"

namespace fsiw {

void RelabelConfig::Validate() const {
  if (tau <= 0) {
    throw ConfigError("counterfactual deadline must be positive, got " +
                      std::to_string(tau));
  }
  if (window > 0 && tau >= window) {
    throw ConfigError("counterfactual deadline " + std::to_string(tau) +
                      " must be shorter than the training window " +
                      std::to_string(window));
  }
}

ArtificialDatasets BuildArtificialDatasets(std::span<const LabeledSample> train,
                                           const RelabelConfig& cfg) {
  cfg.Validate();
  const Timestamp deadline = cfg.training_end - cfg.tau;
  ArtificialDatasets out;
  for (const LabeledSample& sample : train) {
    if (sample.click_ts >= cfg.training_end) {
      throw Error("sample from record " + std::to_string(sample.source) +
                  " was clicked after the training end");
    }
    if (sample.click_ts >= deadline) continue;

    ArtificialSample base;
    base.x = sample.x;
    base.e = sample.e;
    base.e_adj = sample.e - cfg.tau;
    base.source = sample.source;

    const bool converted_late =
        sample.y == 1 && sample.click_ts + *sample.d >= deadline;
    if (sample.y == 1) {
      ArtificialSample row = base;
      row.s = converted_late ? 0 : 1;
      row.destination = Destination::kD1;
      out.d1.push_back(std::move(row));
    }
    if (sample.y == 0 || converted_late) {
      ArtificialSample row = std::move(base);
      row.s = sample.y == 0 ? 1 : 0;
      row.destination = Destination::kD0;
      out.d0.push_back(std::move(row));
    }
  }
  return out;
}

void WriteArtificial(std::ostream& out,
                     std::span<const ArtificialSample> rows) {
  out << "source\tdestination\ts\te\te_adj\n";
  for (const ArtificialSample& row : rows) {
    out << row.source << '\t'
        << (row.destination == Destination::kD1 ? "D1" : "D0") << '\t'
        << row.s << '\t' << row.e << '\t' << row.e_adj << '\n';
  }
}

}  // namespace fsiw
