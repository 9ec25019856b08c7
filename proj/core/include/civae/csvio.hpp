#pragma once

#include <string>
#include <vector>

namespace civae::io {

/// Writes rows of doubles with 17 significant digits. When `config_echo` is
/// nonempty it lands as a single leading `# ...` comment so every artifact
/// carries its provenance; `header` is an optional column-name line.
void write_csv(const std::string& path, const std::string& config_echo,
               const std::string& header, const std::vector<std::vector<double>>& rows);

/// Reads numeric rows, skipping `#` comments and an optional non-numeric
/// header line.
std::vector<std::vector<double>> read_csv(const std::string& path);

std::string format_double(double v); // %.17g

} // namespace civae::io
