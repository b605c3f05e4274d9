#pragma once

// JSON shapes shared by the file formats and the wire protocol.

#include "hitl/metrics.hpp"
#include "hitl/trainer.hpp"
#include "json.hpp"

namespace hitl::codec {

using ojson = nlohmann::ordered_json;

ojson position(Position p);
Position position(const ojson& j);

ojson hyper(const HyperParams& h);
ojson grid(const GridConfig& g);
ojson feedback(const FeedbackDescriptor& f);

// Without run_id; the digest is computed over exactly this document.
ojson run_config_body(const RunConfig& run);
RunConfig run_config(const ojson& j);

ojson q_row(const QRow& row);
ojson episode(const EpisodeRecord& r);
ojson metrics_body(const MetricsReport& m);
ojson decision(const FeedbackDecision& d);

}  // namespace hitl::codec
