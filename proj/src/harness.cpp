#include "lidx/harness.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace lidx {

namespace {

constexpr std::array<const char *, 5> kStructureNames = {"pgm", "alex", "btree", "bandit", "pla"};

std::uint64_t parse_u64(std::string_view cell, std::uint64_t line) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size() || cell.empty())
        throw FormatError("bad number '" + std::string(cell) + "' on line " + std::to_string(line), line);
    return v;
}

} // namespace

const char *to_string(Structure s) noexcept { return kStructureNames[static_cast<std::size_t>(s)]; }

Structure parse_structure(std::string_view name) {
    for (std::size_t i = 0; i < kStructureNames.size(); ++i)
        if (name == kStructureNames[i]) return static_cast<Structure>(i);
    throw Error(ErrorCode::PreconditionViolation, "unknown structure '" + std::string(name) + "'");
}

std::string EventCounts::pack() const {
    std::string out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] == 0) continue;
        if (!out.empty()) out += ';';
        out += kTagNames[i];
        out += '=';
        out += std::to_string(n[i]);
    }
    return out;
}

void write_csv_header(std::ostream &out) { out << kCsvHeader << '\n'; }

void write_csv_row(std::ostream &out, const Measurement &m) {
    out << m.trial << ',' << to_string(m.structure) << ',' << m.op_index << ',' << m.ops << ',' << m.bytes << ','
        << m.ns << ',' << m.height << ',' << m.event << '\n';
}

void write_csv(std::ostream &out, std::span<const Measurement> rows) {
    write_csv_header(out);
    for (const auto &m : rows) write_csv_row(out, m);
}

std::string to_csv(std::span<const Measurement> rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

std::vector<Measurement> parse_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("missing or unexpected CSV header", 0);
    std::vector<Measurement> rows;
    std::uint64_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        for (std::size_t i = 0; i < 7; ++i) {
            const auto comma = rest.find(',');
            if (comma == std::string_view::npos) break;
            cells.push_back(rest.substr(0, comma));
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() != 7 || rest.find(',') != std::string_view::npos)
            throw FormatError("expected 8 columns on line " + std::to_string(lineno), lineno);
        Measurement m;
        m.trial = parse_u64(cells[0], lineno);
        m.structure = parse_structure(cells[1]);
        m.op_index = parse_u64(cells[2], lineno);
        m.ops = parse_u64(cells[3], lineno);
        m.bytes = parse_u64(cells[4], lineno);
        m.ns = parse_u64(cells[5], lineno);
        m.height = parse_u64(cells[6], lineno);
        m.event = std::string(rest);
        rows.push_back(std::move(m));
    }
    return rows;
}

std::vector<Measurement> parse_csv(std::string_view text) {
    std::istringstream is{std::string(text)};
    return parse_csv(is);
}

std::string csv_without_ns(std::span<const Measurement> rows) {
    std::ostringstream os;
    write_csv_header(os);
    for (Measurement m : rows) {
        m.ns = 0;
        write_csv_row(os, m);
    }
    return os.str();
}

std::size_t longest_doubling_chain(const std::map<std::uint64_t, std::vector<std::size_t>> &lengths) {
    std::size_t best = 0;
    for (const auto &[node, lens] : lengths) {
        std::size_t run = 0;
        for (std::size_t i = 0; i < lens.size(); ++i) {
            run = (i > 0 && lens[i] == 2 * lens[i - 1]) ? run + 1 : 1;
            best = std::max(best, run);
        }
    }
    return best;
}

} // namespace lidx
