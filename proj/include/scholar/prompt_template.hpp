#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scholar {

/// A versioned prompt file. Leading lines starting with '#' are metadata
/// ("#template <name> <version>", "#required ..."); the rest is the body with
/// {placeholder} slots.
class PromptTemplate {
public:
    /// Throws ConfigError when a required placeholder is missing from the body.
    static PromptTemplate parse(std::string_view content, const std::vector<std::string>& required);
    static PromptTemplate load(const std::string& path, const std::vector<std::string>& required);

    /// Substitutes {name} slots in one pass; substituted text is never rescanned.
    std::string render(const std::map<std::string, std::string>& values) const;

    const std::string& body() const { return body_; }
    /// "<name> <version>" from the #template line, or empty.
    const std::string& version() const { return version_; }

private:
    std::string body_;
    std::string version_;
};

}  // namespace scholar
