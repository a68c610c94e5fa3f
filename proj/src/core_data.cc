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

#include "fsiw/core_data.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "fsiw/errors.h"
#include "fsiw/random.h"

namespace fsiw {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> columns;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      columns.push_back(line.substr(start));
      break;
    }
    columns.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return columns;
}

Timestamp ParseTimestamp(std::string_view text, std::size_t line,
                         std::size_t column) {
  Timestamp value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(line, column,
                     "malformed timestamp '" + std::string(text) + "'");
  }
  return value;
}

std::string BinToken(std::string_view text, const FieldSpec& field,
                     std::size_t line, std::size_t column) {
  if (text.empty()) return std::string();
  double value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, column,
                     "malformed numeric value '" + std::string(text) +
                         "' for field " + field.name);
  }
  const auto bin = std::upper_bound(field.bin_edges.begin(),
                                    field.bin_edges.end(), value) -
                   field.bin_edges.begin();
  return "b" + std::to_string(bin);
}

}  // namespace

Schema Schema::Categorical(int n) {
  Schema schema;
  for (int i = 0; i < n; ++i) {
    schema.fields.push_back({"f" + std::to_string(i), {}});
  }
  return schema;
}

ClickRecord ParseRecord(std::string_view line, const Schema& schema,
                        std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto columns = SplitTabs(line);
  const std::size_t expected = 2 + schema.fields.size();
  if (columns.size() != expected) {
    throw ParseError(line_number, std::min(columns.size(), expected),
                     "expected " + std::to_string(expected) +
                         " columns, found " + std::to_string(columns.size()));
  }
  ClickRecord record;
  record.click_ts = ParseTimestamp(columns[0], line_number, 0);
  if (!columns[1].empty()) {
    record.conv_ts = ParseTimestamp(columns[1], line_number, 1);
    if (*record.conv_ts < record.click_ts) {
      throw ParseError(line_number, 1, "conversion precedes click");
    }
  }
  record.features.reserve(schema.fields.size());
  for (std::size_t f = 0; f < schema.fields.size(); ++f) {
    const FieldSpec& field = schema.fields[f];
    const std::string_view text = columns[2 + f];
    record.features.push_back(
        {static_cast<int>(f),
         field.bin_edges.empty()
             ? std::string(text)
             : BinToken(text, field, line_number, 2 + f)});
  }
  return record;
}

std::vector<ClickRecord> ReadRecords(std::istream& in, const Schema& schema) {
  std::vector<ClickRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    records.push_back(ParseRecord(line, schema, line_number));
  }
  return records;
}

std::vector<ClickRecord> ReadRecordsFile(const std::string& path,
                                         const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ReadRecords(in, schema);
}

void WriteRecords(std::ostream& out, std::span<const ClickRecord> records) {
  for (const ClickRecord& record : records) {
    out << record.click_ts << '\t';
    if (record.conv_ts) out << *record.conv_ts;
    for (const RawFeature& feature : record.features) {
      out << '\t' << feature.token;
    }
    out << '\n';
  }
}

std::uint64_t HashToken(int field_id, std::string_view token,
                        std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ SplitMix64(seed);
  const auto id = static_cast<std::uint32_t>(field_id);
  for (int shift = 0; shift < 32; shift += 8) {
    h ^= (id >> shift) & 0xffu;
    h *= kFnvPrime;
  }
  for (const char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return SplitMix64(h);
}

bool IsPowerOfTwo(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

FeatureVector HashFeatures(const ClickRecord& record,
                           const HashConfig& config) {
  FeatureVector x;
  x.dim = config.dim;
  x.indices.reserve(record.features.size());
  const std::uint64_t mask = config.dim - 1;
  for (const RawFeature& feature : record.features) {
    x.indices.push_back(static_cast<std::uint32_t>(
        HashToken(feature.field_id, feature.token, config.seed) & mask));
  }
  std::sort(x.indices.begin(), x.indices.end());
  x.indices.erase(std::unique(x.indices.begin(), x.indices.end()),
                  x.indices.end());
  return x;
}

std::vector<FeatureVector> HashAll(std::span<const ClickRecord> records,
                                   const HashConfig& config) {
  if (config.dim < 2 || !IsPowerOfTwo(config.dim)) {
    throw ConfigError("hashing dim must be a power of two >= 2, got " +
                      std::to_string(config.dim));
  }
  std::vector<FeatureVector> out;
  out.reserve(records.size());
  for (const ClickRecord& record : records) {
    out.push_back(HashFeatures(record, config));
  }
  return out;
}

std::vector<LabeledSample> SnapshotLabels(
    std::span<const ClickRecord> records,
    std::span<const FeatureVector> features,
    std::span<const std::size_t> indices, Timestamp training_end) {
  std::vector<LabeledSample> samples;
  samples.reserve(indices.size());
  for (const std::size_t i : indices) {
    const ClickRecord& record = records[i];
    if (record.click_ts >= training_end) continue;
    LabeledSample sample;
    sample.x = features[i];
    sample.e = training_end - record.click_ts;
    sample.click_ts = record.click_ts;
    sample.source = i;
    if (record.conv_ts && *record.conv_ts <= training_end) {
      sample.y = 1;
      sample.d = *record.conv_ts - record.click_ts;
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<LabeledSample> SnapshotLabels(
    std::span<const ClickRecord> records,
    std::span<const FeatureVector> features, Timestamp training_end) {
  std::vector<std::size_t> all(records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return SnapshotLabels(records, features, all, training_end);
}

}  // namespace fsiw
