#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tloss/synthetic.hpp"
#include "tloss/trainer.hpp"

namespace tloss::cli {

using nlohmann::json;

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// RFC-4180 field: quoted only when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  std::string str() const;

 private:
  std::size_t columns_;
  std::string text_;
};

std::string cell(double v);
std::string cell(const std::optional<double>& v);

/// Plain-text table with right-aligned columns.
std::string aligned_table(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows);

inline constexpr int kManifestVersion = 1;

std::string sample_dir_name(std::size_t index);

json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const json& j);

struct Dataset {
  DatasetSpec spec;
  Spacing spacing;
  std::vector<SyntheticSample> samples;
};

/// Writes sample_%04d/{intensity,gt,weak}.mvol and manifest.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

/// Contiguous train / validation / test ranges over the sample order.
struct Split {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Two thirds train, the rest halved between validation and test.
Split default_split(std::size_t n);
/// "a,b,c" sample counts; must sum to at most n with a, b >= 1.
Split parse_split(std::string_view text, std::size_t n);

enum class Part { kTrain, kVal, kTest, kAll };
Part parse_part(std::string_view name);
std::vector<std::size_t> part_indices(const Split& split, Part part, std::size_t n);

json to_json(const TrainConfig& cfg);
json to_json(const TrainReport& report);

void write_text(const std::filesystem::path& path, std::string_view text);
json read_json(const std::filesystem::path& path);

/// "n" or "d,h,w".
Dims parse_dims(std::string_view text);
/// "s" or "d,h,w".
Spacing parse_spacing(std::string_view text);

}  // namespace tloss::cli
