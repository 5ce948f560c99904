// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtc::chem
{

class ChemistryError: public std::runtime_error
{
  public:
    enum class Kind
    {
        EmptyFormula,
        UnknownElement,
        UnbalancedParenthesis,
        InvalidCharacter,
        ZeroCount,
        EmptySpeciesList,
        NoSolution,
        AmbiguousReaction,
        NonPositiveSolution,
        MissingCoefficients,
        WeightTableFormat,
    };

    ChemistryError(Kind kind, std::string detail, std::optional<std::size_t> position = std::nullopt);

    [[nodiscard]] Kind kind() const noexcept { return _kind; }
    [[nodiscard]] const std::string& detail() const noexcept { return _detail; }
    /// Character offset into the offending formula text, for parse errors.
    [[nodiscard]] std::optional<std::size_t> position() const noexcept { return _position; }

  private:
    Kind _kind;
    std::string _detail;
    std::optional<std::size_t> _position;
};

[[nodiscard]] std::string_view to_string(ChemistryError::Kind kind);

/// Atomic weights are held as fixed-point integers in units of 1e-4 g/mol so
/// that sums and 2-decimal rendering are exact.
struct Element
{
    std::string symbol;
    std::int64_t weight_e4 = 0;

    [[nodiscard]] double atomic_weight() const { return static_cast<double>(weight_e4) / 1e4; }
};

/// Symbol -> standard atomic weight lookup.
///
/// The standard table is compiled in (conventional IUPAC standard atomic
/// weights for the elements that have one). An override file with lines of
/// the form "Symbol weight" (comma or whitespace separated, '#' comments) can
/// replace or extend entries.
class ElementTable
{
  public:
    [[nodiscard]] static const ElementTable& standard();

    /// Standard table with the overrides read from `in` applied on top.
    [[nodiscard]] static ElementTable with_overrides(std::istream& in);
    [[nodiscard]] static ElementTable with_overrides(const std::filesystem::path& file);

    [[nodiscard]] std::optional<Element> find(std::string_view symbol) const;
    [[nodiscard]] bool contains(std::string_view symbol) const { return _weights.contains(symbol); }
    [[nodiscard]] std::size_t size() const noexcept { return _weights.size(); }
    [[nodiscard]] std::vector<Element> elements() const;

  private:
    std::map<std::string, std::int64_t, std::less<>> _weights;
};

/// Parses a decimal weight such as "15.999" into 1e-4 units (half-up beyond 4 places).
[[nodiscard]] std::optional<std::int64_t> parse_weight_e4(std::string_view text);

struct ChemicalFormula
{
    std::map<std::string, std::int64_t> composition;
    std::string source_text;

    [[nodiscard]] std::int64_t count(std::string_view symbol) const;

    /// Canonical flat rendering of the composition, e.g. "CaH2O2".
    [[nodiscard]] std::string serialize() const;
};

/// Parses formulas such as "H2O", "Ca(OH)2" or "K4[Fe(CN)6]" (nested groups).
/// Hydrate dots, charges and phase annotations are rejected.
[[nodiscard]] ChemicalFormula parse_formula(std::string_view text,
                                            const ElementTable& table = ElementTable::standard());

class MolarMass
{
  public:
    constexpr explicit MolarMass(std::int64_t e4 = 0): _e4(e4) {}

    [[nodiscard]] constexpr std::int64_t e4() const noexcept { return _e4; }
    [[nodiscard]] double grams_per_mole() const { return static_cast<double>(_e4) / 1e4; }

    /// Two decimals, half-up; a ".00" tail collapses to an integer ("18", "18.02").
    [[nodiscard]] std::string render() const;

    friend constexpr auto operator<=>(MolarMass, MolarMass) = default;

  private:
    std::int64_t _e4;
};

[[nodiscard]] MolarMass molar_mass(const ChemicalFormula& formula,
                                   const ElementTable& table = ElementTable::standard());

struct Reaction
{
    std::vector<ChemicalFormula> reactants;
    std::vector<ChemicalFormula> products;
    /// Reactant coefficients first, then product coefficients.
    std::optional<std::vector<std::int64_t>> coefficients;

    [[nodiscard]] std::size_t species_count() const { return reactants.size() + products.size(); }
};

/// Smallest positive integer coefficients balancing every element, found as the
/// exact rational nullspace of the element x species matrix.
[[nodiscard]] Reaction balance(std::vector<ChemicalFormula> reactants, std::vector<ChemicalFormula> products);

/// Atom conservation check for a reaction carrying coefficients.
[[nodiscard]] bool is_balanced(const Reaction& reaction);

/// "4Fe + 3O2 → 2Fe2O3"; coefficient 1 is omitted.
[[nodiscard]] std::string format_equation(const Reaction& reaction);

} // namespace mtc::chem
