#include "scholar/api_json.hpp"

namespace scholar::api {

using nlohmann::json;

json to_json(const answer::Answer& a) {
    return {{"text", a.text},
            {"citations", a.citations},
            {"abstained", a.abstained},
            {"failed", a.failed},
            {"model_id", a.model_id},
            {"latency_seconds", a.latency_seconds},
            {"cost_dollars", a.cost},
            {"prompt_tokens", a.prompt_tokens},
            {"completion_tokens", a.completion_tokens},
            {"diagnostics", a.diagnostics}};
}

json to_json(const answer::EvidenceItem& item) {
    json j = {{"index", item.index},
              {"kind", answer::to_string(item.kind)},
              {"ref", item.ref},
              {"text", item.text},
              {"source_doi", item.source_doi},
              {"source_pids", item.source_pids},
              {"score", item.score}};
    if (item.tuple) {
        j["tuple"] = {{"subject", item.tuple->subject},
                      {"relation", item.tuple->relation},
                      {"object", item.tuple->object},
                      {"reference_relation", item.tuple->reference_relation},
                      {"reference_node", item.tuple->reference_node}};
    }
    return j;
}

json to_json(const answer::EvidenceSet& evidence) {
    json items = json::array();
    for (const auto& item : evidence.items) items.push_back(to_json(item));
    return items;
}

json to_json(const graph::Subgraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"label", n.label}});
    json edges = json::array();
    for (const auto& e : g.edges) {
        edges.push_back({{"source", e.source}, {"target", e.target}, {"relation", e.relation}, {"tuple_id", e.tuple_id}});
    }
    return {{"nodes", nodes}, {"edges", edges}};
}

json to_json(const QueryOutcome& o) {
    json j = {{"pipeline", to_string(o.pipeline)},
              {"question", o.question},
              {"answer", to_json(o.answer)},
              {"evidence", to_json(o.evidence)},
              {"retrieved_pids", o.retrieved_pids},
              {"retrieved_dois", o.retrieved_dois},
              {"citation_report",
               {{"ok", o.citation_report.ok()},
                {"dangling", o.citation_report.dangling},
                {"abstained_with_citations", o.citation_report.abstained_with_citations}}},
              {"rerank_skipped", o.rerank_skipped},
              {"diagnostics", o.diagnostics},
              {"retrieval_seconds", o.retrieval_seconds},
              {"total_seconds", o.total_seconds}};
    if (o.pipeline == Pipeline::vector) j["context_starts"] = o.context_starts;
    if (o.pipeline == Pipeline::graph) {
        j["keywords"] = o.keywords;
        if (o.subgraph) j["subgraph"] = to_json(*o.subgraph);
    }
    return j;
}

json to_json(const corpus::Paragraph& p) {
    return {{"pid", p.pid},
            {"doi", p.doi},
            {"section_path", p.section_path},
            {"ordinal", p.ordinal},
            {"seq", p.seq},
            {"text", p.text}};
}

json to_json(const kg::KgTuple& t) {
    return {{"tuple_id", t.tuple_id},
            {"subject", t.subject},
            {"relation", t.relation},
            {"object", t.object},
            {"reference_relation", t.reference_relation},
            {"reference_node", t.reference_node},
            {"source_pid", t.source_pid},
            {"source_doi", t.source_doi},
            {"citation_markers", t.citation_markers}};
}

json to_json(const EvidenceDetail& d) {
    json paragraphs = json::array();
    for (const auto& p : d.paragraphs) paragraphs.push_back(to_json(p));
    json j = {{"ref", d.ref}, {"kind", answer::to_string(d.kind)}, {"paragraphs", paragraphs}};
    if (d.chunk) {
        j["chunk"] = {{"chunk_id", d.chunk->chunk_id},
                      {"doi", d.chunk->doi},
                      {"section_path", d.chunk->section_path},
                      {"member_pids", d.chunk->member_pids},
                      {"text", d.chunk->text}};
    }
    if (d.tuple) j["tuple"] = to_json(*d.tuple);
    return j;
}

json to_json(const StoreStats& s) {
    json clusters = json::array();
    for (const auto& c : s.top_clusters) {
        clusters.push_back({{"canonical_id", c.canonical_id}, {"label", c.label}, {"member_count", c.member_count}});
    }
    return {{"status", s.status()},
            {"documents", s.documents},
            {"paragraphs", s.paragraphs},
            {"chunks", s.chunks},
            {"vectors", s.vectors},
            {"tuples", s.tuples},
            {"entities", s.entities},
            {"canonical_entities", s.canonicals},
            {"feedback", s.feedback},
            {"top_clusters", clusters}};
}

json to_json(const corpus::IngestSummary& s) {
    return {{"documents_read", s.documents_read},
            {"documents_kept", s.documents_kept},
            {"paragraphs", s.paragraphs},
            {"chunks", s.chunks}};
}

json to_json(const kg::BuildSummary& s) {
    return {{"paragraphs", s.paragraphs},
            {"tuples_extracted", s.tuples_extracted},
            {"tuples_stored", s.tuples_stored},
            {"failed_paragraphs", s.failed_paragraphs},
            {"malformed_lines", s.malformed_lines}};
}

json to_json(const canon::CanonicalizeSummary& s) {
    return {{"entities", s.entities},
            {"canonical_entities", s.canonicals},
            {"numeric_clusters", s.numeric_clusters},
            {"coarse_clusters", s.coarse_clusters}};
}

json versioned(json body) {
    body["schema_version"] = kSchemaVersion;
    return body;
}

}  // namespace scholar::api
