// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtc::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Looks up an environment variable.
using Environment = std::function<std::optional<std::string>(const std::string&)>;

[[nodiscard]] Environment process_environment();

class ConfigError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// "key = value" lines; '#' starts a comment line. Throws ConfigError on a
/// line without '=' or an empty key.
[[nodiscard]] std::map<std::string, std::string> parse_config(std::istream& in);

/// Setting lookup in precedence order: flag, then MTC_<KEY> from the
/// environment, then the config file, then the default.
class Settings
{
  public:
    Settings(std::map<std::string, std::string> file, Environment env);

    /// `flag` is the command-line value, if given.
    [[nodiscard]] std::optional<std::string> get(const std::string& key, const std::optional<std::string>& flag) const;
    [[nodiscard]] std::string get(const std::string& key, const std::optional<std::string>& flag,
                                  const std::string& fallback) const;

    /// "base_url" -> "MTC_BASE_URL".
    [[nodiscard]] static std::string env_name(const std::string& key);

  private:
    std::map<std::string, std::string> _file;
    Environment _env;
};

/// Runs the command line `args` (without the program name). Returns the exit
/// code: 0 success, 1 domain error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Environment& env = process_environment());

} // namespace mtc::cli
