#include <gtest/gtest.h>

#include <set>

#include "qtp/emit.hpp"
#include "qtp/engine.hpp"
#include "qtp/presets.hpp"

using namespace qtp;

namespace {

std::vector<std::int64_t> final_deliveries(const RunResult& r, SessionId s) {
  std::vector<std::int64_t> out;
  for (const auto& rec : r.trace) {
    std::int64_t d = 0;
    for (const auto& f : rec.flows)
      if (f.session == s && f.final_hop()) d += f.delivered;
    out.push_back(d);
  }
  return out;
}

// host 0 - relay 1 - relay 2 - host 3 with the given relay memory.
Topology relay_line(int relay_memory) {
  Topology t;
  t.kind = NetworkKind::TagQdnR;
  NodeId a = t.add_node(NodeKind::Host, {0, 0}, 1000);
  NodeId r1 = t.add_node(NodeKind::Relay, {1, 0}, relay_memory);
  NodeId r2 = t.add_node(NodeKind::Relay, {2, 0}, relay_memory);
  NodeId b = t.add_node(NodeKind::Host, {3, 0}, 1000);
  t.add_edge(a, r1);
  t.add_edge(r1, r2);
  t.add_edge(r2, b);
  return t;
}

RunConfig relay_config(int relay_memory, int n_slots) {
  RunConfig c;
  c.protocol = Protocol::TagQTP;
  c.network = NetworkKind::TagQdnR;
  c.topology = relay_line(relay_memory);
  c.n_slots = n_slots;
  SessionSpec s;
  s.src = NodeId{0};
  s.dst = NodeId{3};
  c.sessions.push_back(s);
  return c;
}

void expect_pools_within_capacity(const RunResult& r) {
  for (const auto& rec : r.trace)
    for (const auto& p : rec.pools) ASSERT_LE(p.reserved, p.capacity);
}

}  // namespace

TEST(Engine, TeleSlowStartDoubles) {
  auto c = single_bottleneck_config(1, 1'000'000, 5);
  auto r = run(c);
  EXPECT_EQ(final_deliveries(r, 0), (std::vector<std::int64_t>{1, 2, 4, 8, 16}));
  EXPECT_EQ(r.total_delivered(), 31);
}

TEST(Engine, TagWindowTwoDeliversEveryOtherSlot) {
  RunConfig c;
  c.protocol = Protocol::TagQTP;
  c.network = NetworkKind::TagQdnS;
  c.topology = appendix_e_topology(NetworkKind::TagQdnS);
  c.n_slots = 10;
  SessionSpec s;
  s.src = NodeId{1};
  s.dst = kAppendixEEgress;
  s.window_cap = 2;
  c.sessions.push_back(s);
  auto r = run(c);
  EXPECT_EQ(final_deliveries(r, 0), (std::vector<std::int64_t>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}));
  for (const auto& rec : r.trace) EXPECT_EQ(rec.flows.at(0).granted, 2);
}

TEST(Engine, FiniteSessionRetires) {
  auto c = single_bottleneck_config(1, 1'000'000, 4);
  c.sessions[0].qubits = 3;
  c.sessions[0].initial_window = 5;
  auto r = run(c);
  EXPECT_EQ(r.total_delivered(), 3);
  ASSERT_EQ(r.trace[0].flows.size(), 1u);
  EXPECT_EQ(r.trace[0].flows[0].granted, 5);
  EXPECT_EQ(r.trace[0].flows[0].delivered, 3);
  EXPECT_TRUE(r.trace[1].flows.empty());
  // Surplus circuits are released before the pools are recorded.
  const NodeId egress = c.sessions[0].dst;
  for (const auto& p : r.trace[0].pools)
    if (p.node == egress && p.pool == PoolKind::Receive) EXPECT_EQ(p.reserved, 3);
}

TEST(Engine, ZeroSlots) {
  auto c = single_bottleneck_config(3, 100, 0);
  auto r = run(c);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.total_delivered(), 0);
  EXPECT_EQ(throughput(r).per_slot, 0.0);
}

TEST(Engine, Deterministic) {
  auto c = waxman_run_config(Protocol::TagQTP, NetworkKind::TagQdnS, 20, 15, 3, 60, 0.7);
  auto a = run(c);
  auto b = run(c);
  EXPECT_EQ(to_csv(flow_table(a)), to_csv(flow_table(b)));
  EXPECT_EQ(to_csv(pool_table(a)), to_csv(pool_table(b)));
  c.seed = 4;
  EXPECT_NE(to_csv(flow_table(run(c))), to_csv(flow_table(a)));
}

TEST(Engine, LossesComeFromTheChannelStream) {
  auto c = waxman_run_config(Protocol::TagQTP, NetworkKind::TagQdnS, 15, 10, 8, 40, 0.5);
  auto r = run(c);
  int losses = 0, sent = 0;
  for (const auto& rec : r.trace)
    for (const auto& f : rec.flows) {
      losses += f.losses;
      sent += f.first_sent + f.second_sent;
    }
  ASSERT_GT(sent, 200);
  EXPECT_NEAR(static_cast<double>(losses) / sent, 0.5, 0.08);
}

TEST(Engine, StartSlotDelaysAdmission) {
  auto c = single_bottleneck_config(2, 1000, 6);
  c.sessions[1].start_slot = 3;
  auto r = run(c);
  for (int slot = 0; slot < 6; ++slot) EXPECT_EQ(r.trace[slot].flows.size(), slot < 3 ? 1u : 2u);
  EXPECT_EQ(final_deliveries(r, 1)[3], 1);
}

TEST(Engine, RelayPipelineTwoSlotsPerHop) {
  auto c = relay_config(1000, 10);
  c.sessions[0].qubits = 1;
  auto r = run(c);
  auto d = final_deliveries(r, 0);
  EXPECT_EQ(d, (std::vector<std::int64_t>{0, 0, 0, 0, 0, 1, 0, 0, 0, 0}));
  ASSERT_EQ(r.trace[0].flows.size(), 3u);
  EXPECT_EQ(r.trace[0].flows[0].first_sent, 1);
  EXPECT_EQ(r.trace[2].flows[1].first_sent, 1);
  EXPECT_EQ(r.trace[4].flows[2].first_sent, 1);
}

TEST(Engine, RelayThroughputFollowsSmallestHop) {
  auto c = relay_config(1000, 120);
  auto r = run(c);
  expect_pools_within_capacity(r);
  // A hop never delivers more than reached it, and once the pipeline is full
  // every hop runs at about the same rate.
  std::vector<std::int64_t> total(3, 0), late(3, 0);
  for (const auto& rec : r.trace)
    for (const auto& f : rec.flows) {
      total[f.hop] += f.delivered;
      if (rec.slot >= 60) late[f.hop] += f.delivered;
    }
  EXPECT_GT(total[2], 0);
  EXPECT_LE(total[2], total[1]);
  EXPECT_LE(total[1], total[0]);
  EXPECT_NEAR(static_cast<double>(late[2]) / late[0], 1.0, 0.1);
  EXPECT_NO_THROW(throughput(r));
}

TEST(Engine, ExhaustedRelayStallsUpstream) {
  // Relay send pools of 9*10/13 = 6 units queue at most 2 qubits.
  auto c = relay_config(10, 40);
  auto r = run(c);
  expect_pools_within_capacity(r);
  std::int64_t hop0 = 0, hop2 = 0;
  for (const auto& rec : r.trace)
    for (const auto& f : rec.flows) {
      if (f.hop == 0) hop0 += f.delivered;
      if (f.hop == 2) hop2 += f.delivered;
    }
  EXPECT_LE(hop0, hop2 + 2 * 2 + 4);
  EXPECT_GT(hop2, 0);
}

TEST(Engine, ConservationAndCapacityOnWaxman) {
  for (auto setup : kWideAreaSetups) {
    auto c = waxman_run_config(setup.protocol, setup.network, 25, 30, 2, 80);
    auto r = run(c);
    expect_pools_within_capacity(r);
    EXPECT_NO_THROW(throughput(r)) << setup_name(setup);
    EXPECT_GT(r.total_delivered(), 0) << setup_name(setup);
    for (const auto& rec : r.trace)
      for (const auto& f : rec.flows) {
        if (setup.protocol == Protocol::EW) continue;
        ASSERT_TRUE(f.granted == f.announced || f.granted == f.announced / 2);
      }
  }
}

TEST(Engine, RandomSessionsAreDistinctPairs) {
  auto t = generate_waxman(10, 3.0, 100.0, 0.4, 1);
  auto specs = random_session_specs(t, 60, 9);
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (const auto& s : specs) {
    EXPECT_NE(s.src, s.dst);
    EXPECT_TRUE(t.is_host(s.src) && t.is_host(s.dst));
    pairs.emplace(s.src, s.dst);
  }
  EXPECT_EQ(pairs.size(), 60u);
  EXPECT_THROW(random_session_specs(t, 91, 9), Error);
}

TEST(Engine, PathsStayFixed) {
  auto c = waxman_run_config(Protocol::TeleQTP, NetworkKind::TeleQDN, 20, 20, 5, 30);
  auto r = run(c);
  for (const auto& s : r.sessions) {
    ASSERT_GE(s.path.size(), 2u);
    EXPECT_EQ(s.path.front(), s.src);
    EXPECT_EQ(s.path.back(), s.dst);
    Path p{s.src, s.dst, s.path};
    EXPECT_TRUE(is_valid_path(r.topology, p));
  }
}

TEST(Engine, ConfigErrors) {
  RunConfig c;
  c.protocol = Protocol::TagQTP;
  c.network = NetworkKind::TeleQDN;
  try {
    run(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config_error);
  }
  auto bad = single_bottleneck_config(1, 100, 5);
  bad.sessions[0].dst = NodeId{0};  // the hub is not a host
  EXPECT_THROW(run(bad), Error);
  auto neg = single_bottleneck_config(1, 100, 5);
  neg.p = 1.5;
  EXPECT_THROW(run(neg), Error);
  EXPECT_FALSE(compatible(Protocol::EW, NetworkKind::TagQdnS));
  EXPECT_TRUE(compatible(Protocol::TagQTP, NetworkKind::TagQdnS));
  EXPECT_EQ(protocol_from_string("FRA"), Protocol::FRA);
  EXPECT_THROW(protocol_from_string("tcp"), Error);
}

TEST(Engine, StepAfterFinishThrows) {
  Engine e(single_bottleneck_config(1, 100, 1));
  e.step();
  EXPECT_TRUE(e.finished());
  EXPECT_THROW(e.step(), Error);
}

TEST(Rng, GoldenDrawsSeedZero) {
  auto rng = seeded_rng(0);
  const std::uint64_t expect[] = {17849210646460276755ULL, 10164960536040305013ULL,
                                   6623559717625663698ULL, 12337025944114357310ULL};
  for (auto e : expect) EXPECT_EQ(rng.next(), e);
}

TEST(Rng, LabelsGiveIndependentStreams) {
  RandomStream a(5, "topology"), b(5, "channel"), c(5, "topology");
  EXPECT_NE(a.next(), b.next());
  EXPECT_EQ(c.next(), RandomStream(5, "topology").next());
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(a.below(7));
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_EQ(a.below(0), 0u);
}
