#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lockin {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

/// Minimal CSV emitter; numbers use format_double so replays compare bitwise.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void header(const std::vector<std::string>& names);
    CsvWriter& field(double v);
    CsvWriter& field(std::size_t v);
    CsvWriter& field(long long v);
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(bool v);
    CsvWriter& field(std::string_view v);
    CsvWriter& field(const char* v) { return field(std::string_view(v)); }
    CsvWriter& empty_field();
    void end_row();

private:
    void separator();

    std::ostream& os_;
    bool row_started_ = false;
};

} // namespace lockin
