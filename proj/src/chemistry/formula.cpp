// SPDX-License-Identifier: Apache-2.0
#include <mtc/chemistry.hpp>

#include <cctype>

namespace mtc::chem
{

namespace
{

constexpr std::int64_t kMaxMultiplier = 1'000'000;
constexpr std::int64_t kMaxAtoms = 1'000'000'000'000;

using Composition = std::map<std::string, std::int64_t>;

class FormulaParser
{
  public:
    FormulaParser(std::string_view text, std::size_t offset, const ElementTable& table):
        _text(text), _offset(offset), _table(table)
    {
    }

    Composition parse()
    {
        auto result = group('\0');
        if (_pos != _text.size())
            throw ChemistryError(ChemistryError::Kind::UnbalancedParenthesis,
                                 "unmatched '" + std::string(1, _text[_pos]) + "'", where());
        return result;
    }

  private:
    std::size_t where() const { return _offset + _pos; }

    bool at_end() const { return _pos >= _text.size(); }
    char peek() const { return _text[_pos]; }

    static bool upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
    static bool lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
    static bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

    std::int64_t multiplier()
    {
        if (at_end() || !digit(peek()))
            return 1;
        auto start = where();
        std::int64_t value = 0;
        while (!at_end() && digit(peek()))
        {
            value = value * 10 + (peek() - '0');
            if (value > kMaxMultiplier)
                throw ChemistryError(ChemistryError::Kind::InvalidCharacter, "multiplier too large", start);
            ++_pos;
        }
        if (value == 0)
            throw ChemistryError(ChemistryError::Kind::ZeroCount, "explicit zero multiplier", start);
        return value;
    }

    static void add(Composition& into, const std::string& symbol, std::int64_t count, std::size_t position)
    {
        auto& slot = into[symbol];
        slot += count;
        if (slot > kMaxAtoms)
            throw ChemistryError(ChemistryError::Kind::InvalidCharacter, "atom count too large", position);
    }

    Composition group(char closer)
    {
        Composition result;
        while (!at_end())
        {
            char c = peek();
            if (upper(c))
            {
                auto start = where();
                auto begin = _pos++;
                while (!at_end() && lower(peek()))
                    ++_pos;
                std::string symbol(_text.substr(begin, _pos - begin));
                if (!_table.contains(symbol))
                    throw ChemistryError(ChemistryError::Kind::UnknownElement, symbol, start);
                add(result, symbol, multiplier(), start);
            }
            else if (c == '(' || c == '[')
            {
                auto start = where();
                ++_pos;
                auto inner = group(c == '(' ? ')' : ']');
                auto times = multiplier();
                for (const auto& [symbol, count]: inner)
                {
                    if (count > kMaxAtoms / times)
                        throw ChemistryError(ChemistryError::Kind::InvalidCharacter, "atom count too large", start);
                    add(result, symbol, count * times, start);
                }
            }
            else if (c == ')' || c == ']')
            {
                if (c != closer)
                    throw ChemistryError(ChemistryError::Kind::UnbalancedParenthesis,
                                         "unexpected '" + std::string(1, c) + "'", where());
                if (result.empty())
                    throw ChemistryError(ChemistryError::Kind::InvalidCharacter, "empty group", where());
                ++_pos;
                return result;
            }
            else
            {
                throw ChemistryError(ChemistryError::Kind::InvalidCharacter,
                                     "unexpected '" + std::string(1, c) + "'", where());
            }
        }
        if (closer != '\0')
            throw ChemistryError(ChemistryError::Kind::UnbalancedParenthesis,
                                 std::string("missing '") + closer + "'", where());
        return result;
    }

    std::string_view _text;
    std::size_t _offset;
    const ElementTable& _table;
    std::size_t _pos = 0;
};

} // namespace

std::int64_t ChemicalFormula::count(std::string_view symbol) const
{
    for (const auto& [s, n]: composition)
        if (s == symbol)
            return n;
    return 0;
}

std::string ChemicalFormula::serialize() const
{
    std::string out;
    for (const auto& [symbol, count]: composition)
    {
        out += symbol;
        if (count != 1)
            out += std::to_string(count);
    }
    return out;
}

ChemicalFormula parse_formula(std::string_view text, const ElementTable& table)
{
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        throw ChemistryError(ChemistryError::Kind::EmptyFormula, "formula is empty");
    auto last = text.find_last_not_of(" \t\r\n");
    auto body = text.substr(first, last - first + 1);

    FormulaParser parser(body, first, table);
    ChemicalFormula formula;
    formula.composition = parser.parse();
    formula.source_text = std::string(body);
    return formula;
}

std::string MolarMass::render() const
{
    auto cents = (_e4 + 50) / 100;
    auto whole = cents / 100;
    auto frac = cents % 100;
    if (frac == 0)
        return std::to_string(whole);
    return std::to_string(whole) + (frac < 10 ? ".0" : ".") + std::to_string(frac);
}

MolarMass molar_mass(const ChemicalFormula& formula, const ElementTable& table)
{
    std::int64_t total = 0;
    for (const auto& [symbol, count]: formula.composition)
    {
        auto element = table.find(symbol);
        if (!element)
            throw ChemistryError(ChemistryError::Kind::UnknownElement, symbol);
        total += element->weight_e4 * count;
    }
    return MolarMass{total};
}

} // namespace mtc::chem
