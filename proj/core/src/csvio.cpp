#include "civae/csvio.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "civae/errors.hpp"

namespace civae::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::string& config_echo,
               const std::string& header, const std::vector<std::vector<double>>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw DataError("cannot open " + tmp + " for writing");
        if (!config_echo.empty()) os << "# " << config_echo << "\n";
        if (!header.empty()) os << header << "\n";
        std::string line;
        for (const auto& row : rows) {
            line.clear();
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) line += ',';
                line += format_double(row[i]);
            }
            os << line << "\n";
        }
        if (!os) throw DataError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move " + tmp + " to " + path);
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first_content = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (first_content) { // header line
                first_content = false;
                continue;
            }
            throw DataError("non-numeric cell in " + path + ": '" + cell + "'");
        }
        first_content = false;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace civae::io
