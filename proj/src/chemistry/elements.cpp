// SPDX-License-Identifier: Apache-2.0
#include <mtc/chemistry.hpp>

#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <utility>

namespace mtc::chem
{

namespace
{

struct WeightEntry
{
    std::string_view symbol;
    std::string_view weight;
};

// Conventional standard atomic weights (IUPAC abridged values). Elements without
// a standard atomic weight (Tc, Pm, Po and beyond except Th, Pa, U) are absent.
constexpr std::array<WeightEntry, 84> kStandardWeights{{
    {"H", "1.008"},     {"He", "4.0026"},   {"Li", "6.94"},     {"Be", "9.0122"},   {"B", "10.81"},
    {"C", "12.011"},    {"N", "14.007"},    {"O", "15.999"},    {"F", "18.998"},    {"Ne", "20.180"},
    {"Na", "22.990"},   {"Mg", "24.305"},   {"Al", "26.982"},   {"Si", "28.085"},   {"P", "30.974"},
    {"S", "32.06"},     {"Cl", "35.45"},    {"Ar", "39.95"},    {"K", "39.098"},    {"Ca", "40.078"},
    {"Sc", "44.956"},   {"Ti", "47.867"},   {"V", "50.942"},    {"Cr", "51.996"},   {"Mn", "54.938"},
    {"Fe", "55.845"},   {"Co", "58.933"},   {"Ni", "58.693"},   {"Cu", "63.546"},   {"Zn", "65.38"},
    {"Ga", "69.723"},   {"Ge", "72.630"},   {"As", "74.922"},   {"Se", "78.971"},   {"Br", "79.904"},
    {"Kr", "83.798"},   {"Rb", "85.468"},   {"Sr", "87.62"},    {"Y", "88.906"},    {"Zr", "91.224"},
    {"Nb", "92.906"},   {"Mo", "95.95"},    {"Ru", "101.07"},   {"Rh", "102.91"},   {"Pd", "106.42"},
    {"Ag", "107.87"},   {"Cd", "112.41"},   {"In", "114.82"},   {"Sn", "118.71"},   {"Sb", "121.76"},
    {"Te", "127.60"},   {"I", "126.90"},    {"Xe", "131.29"},   {"Cs", "132.91"},   {"Ba", "137.33"},
    {"La", "138.91"},   {"Ce", "140.12"},   {"Pr", "140.91"},   {"Nd", "144.24"},   {"Sm", "150.36"},
    {"Eu", "151.96"},   {"Gd", "157.25"},   {"Tb", "158.93"},   {"Dy", "162.50"},   {"Ho", "164.93"},
    {"Er", "167.26"},   {"Tm", "168.93"},   {"Yb", "173.05"},   {"Lu", "174.97"},   {"Hf", "178.49"},
    {"Ta", "180.95"},   {"W", "183.84"},    {"Re", "186.21"},   {"Os", "190.23"},   {"Ir", "192.22"},
    {"Pt", "195.08"},   {"Au", "196.97"},   {"Hg", "200.59"},   {"Tl", "204.38"},   {"Pb", "207.2"},
    {"Bi", "208.98"},   {"Th", "232.04"},   {"Pa", "231.04"},   {"U", "238.03"},
}};

bool is_symbol(std::string_view s)
{
    if (s.empty() || !std::isupper(static_cast<unsigned char>(s.front())))
        return false;
    for (auto c: s.substr(1))
        if (!std::islower(static_cast<unsigned char>(c)))
            return false;
    return true;
}

} // namespace

ChemistryError::ChemistryError(Kind kind, std::string detail, std::optional<std::size_t> position):
    std::runtime_error(std::string(to_string(kind)) + ": " + detail),
    _kind(kind),
    _detail(std::move(detail)),
    _position(position)
{
}

std::string_view to_string(ChemistryError::Kind kind)
{
    using K = ChemistryError::Kind;
    switch (kind)
    {
        case K::EmptyFormula: return "EmptyFormula";
        case K::UnknownElement: return "UnknownElement";
        case K::UnbalancedParenthesis: return "UnbalancedParenthesis";
        case K::InvalidCharacter: return "InvalidCharacter";
        case K::ZeroCount: return "ZeroCount";
        case K::EmptySpeciesList: return "EmptySpeciesList";
        case K::NoSolution: return "NoSolution";
        case K::AmbiguousReaction: return "AmbiguousReaction";
        case K::NonPositiveSolution: return "NonPositiveSolution";
        case K::MissingCoefficients: return "MissingCoefficients";
        case K::WeightTableFormat: return "WeightTableFormat";
    }
    return "ChemistryError";
}

std::optional<std::int64_t> parse_weight_e4(std::string_view text)
{
    std::int64_t whole = 0;
    std::size_t i = 0;
    bool any_digit = false;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i)
    {
        whole = whole * 10 + (text[i] - '0');
        any_digit = true;
        if (whole > 100'000'000)
            return std::nullopt;
    }
    std::int64_t frac = 0;
    int places = 0;
    bool round_up = false;
    if (i < text.size() && text[i] == '.')
    {
        ++i;
        for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i)
        {
            any_digit = true;
            if (places < 4)
            {
                frac = frac * 10 + (text[i] - '0');
                ++places;
            }
            else if (places == 4)
            {
                round_up = text[i] >= '5';
                ++places;
            }
        }
    }
    if (!any_digit || i != text.size())
        return std::nullopt;
    for (int p = std::min(places, 4); p < 4; ++p)
        frac *= 10;
    return whole * 10'000 + frac + (round_up ? 1 : 0);
}

const ElementTable& ElementTable::standard()
{
    static const ElementTable table = [] {
        ElementTable t;
        for (const auto& [symbol, weight]: kStandardWeights)
            t._weights.emplace(std::string(symbol), *parse_weight_e4(weight));
        return t;
    }();
    return table;
}

ElementTable ElementTable::with_overrides(std::istream& in)
{
    ElementTable table = standard();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        for (auto& c: line)
            if (c == ',' || c == '\t')
                c = ' ';
        std::istringstream fields(line);
        std::string symbol;
        std::string weight;
        std::string extra;
        if (!(fields >> symbol))
            continue;
        if (!(fields >> weight) || (fields >> extra))
            throw ChemistryError(ChemistryError::Kind::WeightTableFormat,
                                 "line " + std::to_string(line_no) + ": expected 'symbol weight'");
        auto e4 = parse_weight_e4(weight);
        if (!is_symbol(symbol) || !e4 || *e4 <= 0)
            throw ChemistryError(ChemistryError::Kind::WeightTableFormat,
                                 "line " + std::to_string(line_no) + ": invalid entry '" + symbol + " " + weight + "'");
        table._weights.insert_or_assign(symbol, *e4);
    }
    return table;
}

ElementTable ElementTable::with_overrides(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw ChemistryError(ChemistryError::Kind::WeightTableFormat, "cannot read " + file.string());
    return with_overrides(in);
}

std::optional<Element> ElementTable::find(std::string_view symbol) const
{
    if (auto it = _weights.find(symbol); it != _weights.end())
        return Element{it->first, it->second};
    return std::nullopt;
}

std::vector<Element> ElementTable::elements() const
{
    std::vector<Element> out;
    out.reserve(_weights.size());
    for (const auto& [symbol, e4]: _weights)
        out.push_back({symbol, e4});
    return out;
}

} // namespace mtc::chem
