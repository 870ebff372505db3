#ifndef RADCAP_CSV_HPP
#define RADCAP_CSV_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace radcap {

// RFC 4180: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

std::string csv_escape(const std::string& field);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace radcap

#endif
