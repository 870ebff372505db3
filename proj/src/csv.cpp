#include "radcap/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace radcap {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open CSV file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;

    size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
        } else if (c == '"') {
            in_quotes = true;
            row_started = true;
            ++i;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
            row_started = true;
            ++i;
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
            row_started = false;
            i += 2;
        } else if (c == '\n' || c == '\r') {
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
            row_started = false;
            ++i;
        } else {
            field.push_back(c);
            row_started = true;
            ++i;
        }
    }
    if (in_quotes) throw std::runtime_error(path.string() + ": unterminated quoted CSV field");
    if (row_started || !field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open CSV for writing");
    auto write_row = [&out](const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(fields[i]);
        }
        out << '\n';
    };
    write_row(header);
    for (const auto& row : rows) write_row(row);
    if (!out) throw std::runtime_error(path.string() + ": CSV write failed");
}

}  // namespace radcap
