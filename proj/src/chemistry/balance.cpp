// SPDX-License-Identifier: Apache-2.0
#include <mtc/chemistry.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <limits>
#include <set>

namespace mtc::chem
{

namespace
{

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

using Matrix = std::vector<std::vector<cpp_rational>>;

/// Row-reduces `m` in place and returns the pivot column of each nonzero row.
std::vector<std::size_t> reduce_to_echelon(Matrix& m, std::size_t cols)
{
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < cols && row < m.size(); ++col)
    {
        std::size_t pick = row;
        while (pick < m.size() && m[pick][col] == 0)
            ++pick;
        if (pick == m.size())
            continue;
        std::swap(m[row], m[pick]);

        auto pivot = m[row][col];
        for (auto& v: m[row])
            v /= pivot;
        for (std::size_t r = 0; r < m.size(); ++r)
        {
            if (r == row || m[r][col] == 0)
                continue;
            auto factor = m[r][col];
            for (std::size_t c = col; c < cols; ++c)
                m[r][c] -= factor * m[row][c];
        }
        pivots.push_back(col);
        ++row;
    }
    return pivots;
}

std::string describe(const std::vector<ChemicalFormula>& reactants, const std::vector<ChemicalFormula>& products)
{
    std::string out;
    for (std::size_t i = 0; i < reactants.size(); ++i)
        out += (i ? " + " : "") + reactants[i].source_text;
    out += " → ";
    for (std::size_t i = 0; i < products.size(); ++i)
        out += (i ? " + " : "") + products[i].source_text;
    return out;
}

} // namespace

Reaction balance(std::vector<ChemicalFormula> reactants, std::vector<ChemicalFormula> products)
{
    if (reactants.empty() || products.empty())
        throw ChemistryError(ChemistryError::Kind::EmptySpeciesList, "reaction needs reactants and products");

    std::set<std::string> elements;
    for (const auto* side: {&reactants, &products})
        for (const auto& f: *side)
            for (const auto& [symbol, _]: f.composition)
                elements.insert(symbol);

    const auto species = reactants.size() + products.size();
    Matrix m;
    m.reserve(elements.size());
    for (const auto& symbol: elements)
    {
        std::vector<cpp_rational> row;
        row.reserve(species);
        for (const auto& f: reactants)
            row.emplace_back(f.count(symbol));
        for (const auto& f: products)
            row.emplace_back(-f.count(symbol));
        m.push_back(std::move(row));
    }

    auto pivots = reduce_to_echelon(m, species);
    const auto nullity = species - pivots.size();
    if (nullity == 0)
        throw ChemistryError(ChemistryError::Kind::NoSolution, describe(reactants, products));
    if (nullity > 1)
        throw ChemistryError(ChemistryError::Kind::AmbiguousReaction,
                             describe(reactants, products) + " has " + std::to_string(nullity) +
                                 " independent balancings");

    std::size_t free_col = 0;
    while (std::find(pivots.begin(), pivots.end(), free_col) != pivots.end())
        ++free_col;

    std::vector<cpp_rational> basis(species, cpp_rational(0));
    basis[free_col] = 1;
    for (std::size_t r = 0; r < pivots.size(); ++r)
        basis[pivots[r]] = -m[r][free_col];

    cpp_int lcm_den = 1;
    for (const auto& v: basis)
        lcm_den = boost::multiprecision::lcm(lcm_den, cpp_int(boost::multiprecision::denominator(v)));
    std::vector<cpp_int> ints;
    ints.reserve(species);
    cpp_int gcd_all = 0;
    for (const auto& v: basis)
    {
        cpp_int scaled = boost::multiprecision::numerator(v) * (lcm_den / boost::multiprecision::denominator(v));
        gcd_all = boost::multiprecision::gcd(gcd_all, scaled);
        ints.push_back(std::move(scaled));
    }
    const bool negate = ints.front() < 0;

    std::vector<std::int64_t> coefficients;
    coefficients.reserve(species);
    for (auto& v: ints)
    {
        v /= gcd_all;
        if (negate)
            v = -v;
        if (v <= 0)
            throw ChemistryError(ChemistryError::Kind::NonPositiveSolution,
                                 describe(reactants, products) + " only balances with a non-positive coefficient");
        if (v > std::numeric_limits<std::int64_t>::max())
            throw ChemistryError(ChemistryError::Kind::NoSolution, "coefficients exceed 64-bit range");
        coefficients.push_back(v.convert_to<std::int64_t>());
    }

    return Reaction{std::move(reactants), std::move(products), std::move(coefficients)};
}

bool is_balanced(const Reaction& reaction)
{
    if (!reaction.coefficients || reaction.coefficients->size() != reaction.species_count())
        return false;
    const auto& coef = *reaction.coefficients;
    std::map<std::string, std::int64_t> net;
    std::size_t i = 0;
    for (const auto& f: reaction.reactants)
    {
        for (const auto& [symbol, count]: f.composition)
            net[symbol] += coef[i] * count;
        ++i;
    }
    for (const auto& f: reaction.products)
    {
        for (const auto& [symbol, count]: f.composition)
            net[symbol] -= coef[i] * count;
        ++i;
    }
    for (const auto& [_, balance]: net)
        if (balance != 0)
            return false;
    return true;
}

std::string format_equation(const Reaction& reaction)
{
    if (!reaction.coefficients || reaction.coefficients->size() != reaction.species_count())
        throw ChemistryError(ChemistryError::Kind::MissingCoefficients, "reaction has not been balanced");

    const auto& coef = *reaction.coefficients;
    std::string out;
    std::size_t i = 0;
    auto side = [&](const std::vector<ChemicalFormula>& formulas) {
        for (std::size_t k = 0; k < formulas.size(); ++k, ++i)
        {
            if (k)
                out += " + ";
            if (coef[i] != 1)
                out += std::to_string(coef[i]);
            out += formulas[k].source_text;
        }
    };
    side(reaction.reactants);
    out += " → ";
    side(reaction.products);
    return out;
}

} // namespace mtc::chem
