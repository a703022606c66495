#include "scholar/prompt_template.hpp"

#include "scholar/errors.hpp"
#include "scholar/text.hpp"

namespace scholar {

PromptTemplate PromptTemplate::parse(std::string_view content, const std::vector<std::string>& required) {
    PromptTemplate t;
    auto all = text::lines(content);
    std::size_t i = 0;
    for (; i < all.size() && !all[i].empty() && all[i].front() == '#'; ++i) {
        if (all[i].rfind("#template ", 0) == 0) t.version_ = std::string(text::trim(all[i].substr(10)));
    }
    std::vector<std::string> body(all.begin() + static_cast<std::ptrdiff_t>(i), all.end());
    t.body_ = text::join(body, "\n");
    for (const auto& name : required) {
        if (t.body_.find("{" + name + "}") == std::string::npos) {
            throw ConfigError("prompt template is missing the {" + name + "} placeholder");
        }
    }
    return t;
}

PromptTemplate PromptTemplate::load(const std::string& path, const std::vector<std::string>& required) {
    return parse(text::read_file(path), required);
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(body_.size());
    std::size_t pos = 0;
    while (pos < body_.size()) {
        auto open = body_.find('{', pos);
        if (open == std::string::npos) break;
        auto close = body_.find('}', open + 1);
        if (close == std::string::npos) break;
        out.append(body_, pos, open - pos);
        auto it = values.find(body_.substr(open + 1, close - open - 1));
        if (it != values.end()) {
            out += it->second;
            pos = close + 1;
        } else {
            out.push_back('{');
            pos = open + 1;
        }
    }
    out.append(body_, pos, std::string::npos);
    return out;
}

}  // namespace scholar
