#include "scholar/answer.hpp"

#include "scholar/errors.hpp"
#include "scholar/resources.hpp"
#include "scholar/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <regex>
#include <set>

namespace scholar::answer {

std::string_view to_string(EvidenceKind kind) { return kind == EvidenceKind::chunk ? "chunk" : "tuple"; }

std::string make_ref(EvidenceKind kind, const std::string& id) {
    return std::string(kind == EvidenceKind::chunk ? "c_" : "t_") + text::hex_encode(id);
}

std::pair<EvidenceKind, std::string> parse_ref(const std::string& ref) {
    if (ref.size() < 3 || ref[1] != '_' || (ref[0] != 'c' && ref[0] != 't')) {
        throw NotFoundError("unknown evidence reference: " + ref);
    }
    std::string id;
    try {
        id = text::hex_decode(std::string_view(ref).substr(2));
    } catch (const std::exception&) {
        throw NotFoundError("unknown evidence reference: " + ref);
    }
    return {ref[0] == 'c' ? EvidenceKind::chunk : EvidenceKind::tuple, id};
}

EvidenceSet evidence_from_chunks(const std::vector<vector::RankedChunk>& chunks) {
    EvidenceSet set;
    int n = 0;
    for (const auto& c : chunks) {
        set.items.push_back({++n, EvidenceKind::chunk, make_ref(EvidenceKind::chunk, c.chunk_id), c.text, c.doi,
                             c.member_pids, c.score, std::nullopt});
    }
    return set;
}

EvidenceSet evidence_from_tuples(const std::vector<graph::ScoredTuple>& tuples, const graph::GraphSnapshot& snapshot) {
    EvidenceSet set;
    int n = 0;
    for (const auto& st : tuples) {
        const auto& t = snapshot.tuples.at(st.index);
        set.items.push_back({++n, EvidenceKind::tuple, make_ref(EvidenceKind::tuple, t.tuple_id), kg::render_path(t),
                             t.source_doi, {t.source_pid}, st.s_final,
                             kg::TupleFields{t.subject, t.relation, t.object, t.reference_relation, t.reference_node}});
    }
    return set;
}

PromptTemplate default_answer_template() {
    return PromptTemplate::parse(resources::get("prompts/answer_v1.txt"), {"evidence", "query"});
}

BuiltContext build_context(const std::string& query, const EvidenceSet& evidence, const PromptTemplate& prompt,
                           const ContextOptions& options) {
    std::vector<std::string> lines(evidence.items.size());
    for (std::size_t i = 0; i < evidence.items.size(); ++i) {
        const auto& item = evidence.items[i];
        // One line per item: the generator treats "[n]" line starts as evidence.
        lines[i] = "[" + std::to_string(item.index) + "] " + text::normalize_whitespace(item.text) +
                   " (source: " + item.source_doi + ")";
    }
    std::vector<bool> keep(evidence.items.size(), true);

    auto render = [&] {
        std::string block;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (keep[i]) block += lines[i] + "\n";
        }
        if (block.empty()) {
            block = "No evidence was retrieved. Reply with exactly: " + options.abstention + "\n";
        }
        return prompt.render({{"evidence", block}, {"query", query}, {"abstention", options.abstention}});
    };

    // Drop order: lowest score first, later index first among equal scores.
    std::vector<std::size_t> order(evidence.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (evidence.items[a].score != evidence.items[b].score) {
            return evidence.items[a].score < evidence.items[b].score;
        }
        return evidence.items[a].index > evidence.items[b].index;
    });

    BuiltContext ctx;
    ctx.prompt = render();
    ctx.prompt_tokens = text::whitespace_token_count(ctx.prompt);
    for (std::size_t next = 0; options.token_budget > 0 && ctx.prompt_tokens > options.token_budget &&
                               next < order.size();
         ++next) {
        keep[order[next]] = false;
        ++ctx.dropped;
        ctx.prompt = render();
        ctx.prompt_tokens = text::whitespace_token_count(ctx.prompt);
    }
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) ctx.included.push_back(evidence.items[i].index);
    }
    return ctx;
}

std::vector<int> parse_citations(std::string_view text) {
    static const std::regex kCitation(R"(\[(\d{1,6})\])");
    std::vector<int> out;
    std::string s(text);
    for (std::sregex_iterator it(s.begin(), s.end(), kCitation), end; it != end; ++it) {
        int n = std::stoi((*it)[1].str());
        if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    return out;
}

Answer synthesize(const std::string& query, const EvidenceSet& evidence, providers::Generator& generator,
                  const PromptTemplate& prompt, const ContextOptions& options) {
    Answer answer;
    answer.model_id = generator.config().model_id;
    if (evidence.empty()) {
        answer.text = options.abstention + ".";
        answer.abstained = true;
        answer.diagnostics.push_back("no evidence retrieved; abstained without a provider call");
        return answer;
    }

    auto ctx = build_context(query, evidence, prompt, options);
    answer.context_indices = ctx.included;
    if (ctx.dropped > 0) {
        answer.diagnostics.push_back("dropped " + std::to_string(ctx.dropped) + " evidence item(s) over token budget");
    }

    auto start = std::chrono::steady_clock::now();
    try {
        auto result = providers::generate(ctx.prompt, generator);
        answer.text = text::trim(result.text);
        answer.prompt_tokens = result.prompt_tokens;
        answer.completion_tokens = result.completion_tokens;
        answer.cost = providers::cost_of(result, generator.config());
    } catch (const ProviderError& e) {
        spdlog::warn("answer generation failed: {}", e.what());
        answer.failed = true;
        answer.error_tag = e.tag();
        answer.diagnostics.push_back(std::string("generation failed: ") + e.what());
    }
    answer.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (answer.failed) return answer;

    answer.citations = parse_citations(answer.text);
    answer.abstained = text::starts_with_icase(answer.text, options.abstention);
    return answer;
}

CitationReport validate_citations(const Answer& answer) {
    CitationReport report;
    std::set<int> present(answer.context_indices.begin(), answer.context_indices.end());
    for (int c : answer.citations) {
        if (!present.contains(c)) report.dangling.push_back(c);
    }
    report.abstained_with_citations = answer.abstained && !answer.citations.empty();
    return report;
}

}  // namespace scholar::answer
