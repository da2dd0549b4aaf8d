#include "geocollab/protocol_examples.hpp"

namespace geocollab::protocol {

namespace {

const Json kAnchor = {{"lat", 31.2304}, {"lon", 121.4737}, {"height", 0.0}};
const Json kScene = {{"sketches", Json::object()},
                     {"placements", Json::object()},
                     {"layers", Json::object()},
                     {"stage", "problem_definition"}};
const Json kView = {{"position", {{"lat", 31.2304}, {"lon", 121.4737}, {"height", 850.0}}},
                    {"heading", 45.0},
                    {"pitch", -30.0},
                    {"roll", 0.0}};

Envelope make(MessageKind kind, std::optional<std::uint64_t> seq, std::string sender, Json payload) {
  Envelope e;
  e.kind = kind;
  e.session = "campus-plan";
  e.seq = seq;
  e.sender = std::move(sender);
  e.ts = 1700000000000;
  e.payload = std::move(payload);
  return e;
}

}  // namespace

std::vector<Envelope> golden_examples() {
  const Json participants = Json::array({
      {{"id", "p1"}, {"display_name", "Yu"}, {"role", "leader"}, {"connected", true}, {"joined_at", 1699999990000}},
      {{"id", "p2"}, {"display_name", "Huang"}, {"role", "follower"}, {"connected", true}, {"joined_at", 1700000000000}},
  });
  Json welcome = {{"participant_id", "p2"},
                  {"role", "follower"},
                  {"leader", "p1"},
                  {"participants", participants},
                  {"scene", kScene},
                  {"last_view", kView},
                  {"max_seq", 7},
                  {"role_queue", Json::array()}};
  Json snapshot = welcome;
  snapshot.erase("participant_id");
  snapshot.erase("role");

  Envelope chat_entry = make(MessageKind::chat, 8, "p1", {{"text", "Welcome everyone"}});

  return {
      make(MessageKind::join, std::nullopt, "Huang", {{"display_name", "Huang"}}),
      make(MessageKind::welcome, std::nullopt, "server", welcome),
      make(MessageKind::snapshot, std::nullopt, "server", snapshot),
      make(MessageKind::role_request, 9, "p2", {{"participant_id", "p2"}}),
      make(MessageKind::role_grant, std::nullopt, "p1", {{"target", "p2"}}),
      make(MessageKind::role_deny, std::nullopt, "p1", {{"target", "p2"}}),
      make(MessageKind::view_update, 10, "p1", kView),
      make(MessageKind::sketch_create, 11, "p1",
           {{"id", "sk-1"},
            {"kind", "arrow"},
            {"vertices", Json::array({kAnchor, {{"lat", 31.2310}, {"lon", 121.4745}, {"height", 0.0}}})},
            {"author", "p1"},
            {"style", {{"color", "#d62728"}, {"width", 3.0}}}}),
      make(MessageKind::sketch_delete, 12, "p1", {{"id", "sk-1"}}),
      make(MessageKind::chat, 13, "p2",
           {{"text", "Could the entrance face the lake?"},
            {"anchor", {{"lat", 31.2306}, {"lon", 121.4741}, {"height", 0.0}, {"feature_id", "bldg-geo"}}}}),
      make(MessageKind::op_exec, 14, "p1",
           {{"op_kind", "distance"},
            {"params", {{"a", {{"lat", 31.2304}, {"lon", 121.4737}}}, {"b", {{"lat", 31.2404}, {"lon", 121.4737}}}}}}),
      make(MessageKind::op_result, 15, "server",
           {{"op_exec_seq", 14}, {"op_kind", "distance"}, {"ok", true}, {"result", {{"meters", 1111.950802335329}}}}),
      make(MessageKind::model_place, 16, "p1",
           {{"id", "m-1"}, {"model_ref", "building_a"}, {"position", kAnchor}, {"heading", 90.0}, {"scale", 1.0}}),
      make(MessageKind::model_move, 17, "p1",
           {{"id", "m-1"}, {"position", {{"lat", 31.2305}, {"lon", 121.4738}, {"height", 0.0}}}, {"heading", 120.0}}),
      make(MessageKind::model_remove, 18, "p1", {{"id", "m-1"}}),
      make(MessageKind::layer_import, 19, "p1",
           {{"id", "campus"},
            {"name", "Campus layout"},
            {"features", Json::array({{{"geometry", {{"type", "point"}, {"coordinates", Json::array({kAnchor})}}},
                                       {"properties", {{"name", "Geography building"}}}}})}}),
      make(MessageKind::stage_change, 20, "p1", {{"stage", "problem_analysis"}}),
      make(MessageKind::publish_solution, 21, "p1", {{"title", "Department building plan"}, {"solution_id", "sol-1"}, {"version", 1}}),
      make(MessageKind::participant_joined, 22, "server", {{"participant_id", "p3"}, {"display_name", "Zhang"}, {"role", "follower"}}),
      make(MessageKind::participant_left, 23, "server", {{"participant_id", "p3"}}),
      make(MessageKind::leader_changed, 24, "server", {{"leader", "p2"}, {"previous", "p1"}, {"reason", "grant"}}),
      make(MessageKind::replay_request, std::nullopt, "p2", {{"participant_id", "p2"}, {"last_seq", 7}}),
      make(MessageKind::replay_batch, std::nullopt, "server",
           {{"entries", Json::array({envelope_to_json(chat_entry)})}, {"final", true}}),
      make(MessageKind::error, std::nullopt, "server",
           {{"code", "NotLeader"}, {"message", "sketch_create is reserved for the leader"}, {"ref_kind", "sketch_create"}}),
      make(MessageKind::ping, std::nullopt, "p2", Json::object()),
      make(MessageKind::pong, std::nullopt, "server", {{"in_flight", 0}, {"max_seq", 24}}),
  };
}

}  // namespace geocollab::protocol
