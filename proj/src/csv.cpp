#include "lockin/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <ostream>

namespace lockin {

std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void CsvWriter::separator()
{
    if (row_started_) {
        os_ << ',';
    }
    row_started_ = true;
}

void CsvWriter::header(const std::vector<std::string>& names)
{
    for (const auto& n : names) {
        field(std::string_view(n));
    }
    end_row();
}

CsvWriter& CsvWriter::field(double v)
{
    separator();
    os_ << format_double(v);
    return *this;
}

CsvWriter& CsvWriter::field(std::size_t v)
{
    separator();
    os_ << v;
    return *this;
}

CsvWriter& CsvWriter::field(long long v)
{
    separator();
    os_ << v;
    return *this;
}

CsvWriter& CsvWriter::field(bool v)
{
    separator();
    os_ << (v ? "true" : "false");
    return *this;
}

CsvWriter& CsvWriter::field(std::string_view v)
{
    separator();
    if (v.find_first_of(",\"\n") == std::string_view::npos) {
        os_ << v;
        return *this;
    }
    os_ << '"';
    for (char c : v) {
        if (c == '"') {
            os_ << '"';
        }
        os_ << c;
    }
    os_ << '"';
    return *this;
}

CsvWriter& CsvWriter::empty_field()
{
    separator();
    return *this;
}

void CsvWriter::end_row()
{
    os_ << '\n';
    row_started_ = false;
}

} // namespace lockin
