#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dropkit/error.hpp"
#include "dropkit/io.hpp"

namespace dropkit {

namespace {

struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

std::vector<Record> tokenize(std::string_view text) {
    std::vector<Record> records;
    Record current;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    current.line = 1;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = current.fields.size() == 1 && current.fields[0].empty();
        if (!blank) records.push_back(std::move(current));
        current = Record{};
        current.line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started || !field.empty()) {
                    throw ConfigError("line " + std::to_string(line) + ": stray quote in field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw ConfigError("line " + std::to_string(line) + ": unterminated quote");
    if (field_started || !field.empty() || !current.fields.empty()) end_record();
    return records;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_real(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = s.data();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> parse_index(const std::string& raw) {
    const std::string s = trim(raw);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

void append_real(std::string& out, double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    q.push_back('"');
    return q;
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvSchema& schema,
                  std::vector<std::string>* class_names_out, const std::string& name) {
    const auto records = tokenize(text);
    if (records.empty()) throw ConfigError("CSV input is empty; a header row is required");
    const auto& header = records.front();

    std::size_t label_col = header.fields.size();
    for (std::size_t c = 0; c < header.fields.size(); ++c) {
        if (trim(header.fields[c]) == schema.label_column) label_col = c;
    }
    if (label_col == header.fields.size()) {
        throw ConfigError(line_prefix(header.line) + "no label column named '" +
                          schema.label_column + "' in header");
    }
    const std::size_t width = header.fields.size();
    const std::size_t dim = width - 1;
    if (dim == 0) throw ConfigError(line_prefix(header.line) + "CSV has no feature columns");
    const std::size_t n = records.size() - 1;
    if (n == 0) throw ConfigError("CSV has a header but no data rows");

    FeatureMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    std::vector<std::string> raw_labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = records[r + 1];
        if (rec.fields.size() != width) {
            throw ConfigError(line_prefix(rec.line) + "expected " + std::to_string(width) +
                              " fields, found " + std::to_string(rec.fields.size()));
        }
        std::size_t f = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) {
                raw_labels[r] = trim(rec.fields[c]);
                continue;
            }
            const auto v = parse_real(rec.fields[c]);
            if (!v) {
                throw ConfigError(line_prefix(rec.line) + "non-numeric value '" + rec.fields[c] +
                                  "' in column '" + trim(header.fields[c]) + "'");
            }
            features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f++)) = *v;
        }
    }

    Eigen::VectorXd labels(static_cast<Eigen::Index>(n));
    std::vector<std::string> names;
    if (schema.label_kind == LabelKind::real) {
        for (std::size_t r = 0; r < n; ++r) {
            const auto v = parse_real(raw_labels[r]);
            if (!v) {
                throw ConfigError(line_prefix(records[r + 1].line) + "non-numeric target '" +
                                  raw_labels[r] + "'");
            }
            labels[static_cast<Eigen::Index>(r)] = *v;
        }
    } else {
        const bool all_integer = schema.class_names.empty() &&
            std::all_of(raw_labels.begin(), raw_labels.end(),
                        [](const std::string& s) { return parse_index(s).has_value(); });
        if (all_integer) {
            for (std::size_t r = 0; r < n; ++r) {
                const long long y = *parse_index(raw_labels[r]);
                if (y < 0 || (schema.num_classes && static_cast<std::size_t>(y) >= *schema.num_classes)) {
                    throw ConfigError(line_prefix(records[r + 1].line) + "unknown label class '" +
                                      raw_labels[r] + "'");
                }
                labels[static_cast<Eigen::Index>(r)] = static_cast<double>(y);
            }
        } else {
            // A numeric label that is not an integer is almost certainly a
            // regression target, not a class name.
            for (std::size_t r = 0; r < n && schema.class_names.empty(); ++r) {
                if (parse_real(raw_labels[r]) && !parse_index(raw_labels[r])) {
                    throw ConfigError(line_prefix(records[r + 1].line) +
                                      "non-integer class label '" + raw_labels[r] + "'");
                }
            }
            if (!schema.class_names.empty()) {
                names = schema.class_names;
            } else {
                const std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
                names.assign(distinct.begin(), distinct.end());
            }
            std::map<std::string, std::size_t> index;
            for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], i);
            for (std::size_t r = 0; r < n; ++r) {
                const auto it = index.find(raw_labels[r]);
                if (it == index.end() ||
                    (schema.num_classes && it->second >= *schema.num_classes)) {
                    throw ConfigError(line_prefix(records[r + 1].line) + "unknown label class '" +
                                      raw_labels[r] + "'");
                }
                labels[static_cast<Eigen::Index>(r)] = static_cast<double>(it->second);
            }
        }
    }
    if (class_names_out) *class_names_out = names;
    return Dataset(std::move(features), std::move(labels), name, Provenance::csv);
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 std::vector<std::string>* class_names_out) {
    return parse_csv(read_file(path), schema, class_names_out, path.filename().string());
}

std::string format_csv(const Dataset& data, const std::string& label_column) {
    std::string out;
    for (std::size_t c = 0; c < data.input_dim(); ++c) {
        out += "f" + std::to_string(c) + ",";
    }
    out += quote_if_needed(label_column) + "\n";
    for (std::size_t r = 0; r < data.size(); ++r) {
        const Sample s = data[r];
        for (double v : s.features) {
            append_real(out, v);
            out.push_back(',');
        }
        append_real(out, s.label);
        out.push_back('\n');
    }
    return out;
}

void save_csv(const std::filesystem::path& path, const Dataset& data,
              const std::string& label_column) {
    write_file_atomic(path, format_csv(data, label_column));
}

void write_dropped_ids(const std::filesystem::path& path, std::span<const std::int64_t> ids) {
    std::string out;
    for (auto id : ids) out += std::to_string(id) + "\n";
    write_file_atomic(path, out);
}

std::vector<std::int64_t> read_dropped_ids(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::int64_t> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto v = parse_index(line);
        if (!v) throw ConfigError(path.string() + ": " + line_prefix(lineno) + "not an integer id");
        ids.push_back(*v);
    }
    return ids;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open '" + tmp + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw ConfigError("failed writing '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot move '" + tmp + "' to '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace dropkit
