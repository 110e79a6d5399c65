#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pamlab {

// 17 significant digits; inf/nan spelled "inf", "-inf", "nan".
std::string format_double(double x);
double parse_double(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  void add_row(std::vector<std::string> row);
  std::string to_string() const;
  std::size_t column(std::string_view name) const;

  static CsvTable parse(const std::string& text);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::string sha1_hex(std::string_view bytes);
// Same digest git assigns to a blob with these contents.
std::string git_blob_hash(std::string_view bytes);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pamlab
