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

// Click logs, hashed feature vectors and snapshot labeling.
//
// A click log line is tab separated:
//
//   click_ts <TAB> conv_ts <TAB> feature_0 <TAB> ... <TAB> feature_{k-1}
//
// Timestamps are integer seconds. An empty conv_ts column means no
// conversion was observed. Numeric feature columns are mapped to bin tokens
// using the bin edges declared in the schema.

#ifndef FSIW_CORE_DATA_H_
#define FSIW_CORE_DATA_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsiw {

using Timestamp = std::int64_t;  // Seconds since epoch.
using Duration = std::int64_t;   // Seconds.

inline constexpr Duration kHour = 3600;
inline constexpr Duration kDay = 86400;

struct RawFeature {
  int field_id = 0;
  std::string token;

  friend bool operator==(const RawFeature&, const RawFeature&) = default;
};

struct ClickRecord {
  Timestamp click_ts = 0;
  std::optional<Timestamp> conv_ts;
  std::vector<RawFeature> features;

  // conv_ts - click_ts, absent when there is no conversion.
  std::optional<Duration> delay() const {
    if (!conv_ts) return std::nullopt;
    return *conv_ts - click_ts;
  }

  friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

struct FieldSpec {
  std::string name;
  // Empty for categorical fields. Otherwise the value v falls in bin k where
  // k is the number of edges <= v.
  std::vector<double> bin_edges;
};

struct Schema {
  std::vector<FieldSpec> fields;

  // `n` categorical fields named f0..f{n-1}.
  static Schema Categorical(int n);
};

// Sparse binary feature vector. Indices are strictly increasing and < dim.
struct FeatureVector {
  std::vector<std::uint32_t> indices;
  std::uint32_t dim = 0;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct HashConfig {
  std::uint32_t dim = 1u << 17;
  std::uint64_t seed = 0;
};

// A training sample labeled at snapshot time T.
struct LabeledSample {
  FeatureVector x;
  int y = 0;
  Duration e = 0;  // T - click_ts, always > 0.
  std::optional<Duration> d;  // Present iff y == 1, and then d <= e.
  Timestamp click_ts = 0;
  std::size_t source = 0;  // Index of the originating record.
};

struct TestSample {
  FeatureVector x;
  int c = 0;
  std::size_t source = 0;
};

// Parses one log line. `line_number` is only used in error messages.
// Throws ParseError on malformed timestamps, wrong column counts and
// conversions that precede the click.
ClickRecord ParseRecord(std::string_view line, const Schema& schema,
                        std::size_t line_number = 1);

// Reads every non-empty line of `in`.
std::vector<ClickRecord> ReadRecords(std::istream& in, const Schema& schema);
std::vector<ClickRecord> ReadRecordsFile(const std::string& path,
                                         const Schema& schema);

// Writes records in the format accepted by ParseRecord with a categorical
// schema.
void WriteRecords(std::ostream& out, std::span<const ClickRecord> records);

// Stable 64-bit hash of a (field, token) pair.
std::uint64_t HashToken(int field_id, std::string_view token,
                        std::uint64_t seed);

// dim must be a power of two >= 2.
FeatureVector HashFeatures(const ClickRecord& record, const HashConfig& config);
std::vector<FeatureVector> HashAll(std::span<const ClickRecord> records,
                                   const HashConfig& config);

bool IsPowerOfTwo(std::uint64_t v);

// Labels the records with click_ts < training_end as seen at training_end.
// `features` is aligned with `records`. `indices` restricts labeling to a
// subset of records; output order follows `indices`.
std::vector<LabeledSample> SnapshotLabels(
    std::span<const ClickRecord> records,
    std::span<const FeatureVector> features, Timestamp training_end);
std::vector<LabeledSample> SnapshotLabels(
    std::span<const ClickRecord> records,
    std::span<const FeatureVector> features,
    std::span<const std::size_t> indices, Timestamp training_end);

}  // namespace fsiw

#endif  // FSIW_CORE_DATA_H_
