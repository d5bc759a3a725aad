#include <gtest/gtest.h>

#include "qtp/tag.hpp"

using namespace qtp;

namespace {

QubitTransferState at(std::uint64_t id, int round, Stage stage) {
  QubitTransferState q;
  q.qubit = id;
  q.round = round;
  q.stage = stage;
  q.receiver_stored = stage == Stage::SendSecond ? round + 1 : round;
  q.sender_units = stage == Stage::SendSecond ? 2 : 3;
  return q;
}

TagHopSession source_hop(int window = kTagInitialWindow) {
  TagHopSession h;
  h.flow = FlowKey{0, 0};
  h.sender = NodeId{0};
  h.receiver = NodeId{1};
  h.window = window;
  h.is_source = true;
  h.is_final = true;
  return h;
}

}  // namespace

TEST(Encode, MemoryGate) {
  auto q = encode(4);
  EXPECT_EQ(q.stage, Stage::SendFirst);
  EXPECT_EQ(q.round, 0);
  EXPECT_EQ(q.sender_units, 3);

  std::int64_t free = 3;
  EXPECT_TRUE(try_encode(0, free));
  EXPECT_EQ(free, 0);
  free = 2;
  EXPECT_FALSE(try_encode(0, free));
  EXPECT_EQ(free, 2);
  free = 6;
  EXPECT_TRUE(try_encode(0, free));
  EXPECT_TRUE(try_encode(1, free));
  EXPECT_EQ(free, 0);
}

TEST(Advance, FirstSuccess) {
  auto t = advance(encode(0), true);
  EXPECT_EQ(t.next.stage, Stage::SendSecond);
  EXPECT_EQ(t.next.round, 0);
  EXPECT_EQ(t.next.receiver_stored, 1);
  EXPECT_EQ(t.receiver_delta, 1);
  EXPECT_EQ(t.sender_delta, -1);
}

TEST(Advance, FirstFailureKeepsState) {
  auto q = at(0, 2, Stage::SendFirst);
  auto t = advance(q, false);
  EXPECT_EQ(t.next.stage, Stage::SendFirst);
  EXPECT_EQ(t.next.round, 2);
  EXPECT_EQ(t.sender_delta, 0);
  EXPECT_EQ(t.receiver_delta, 0);
}

TEST(Advance, TwoSuccessesDeliverWithPeakTwo) {
  auto t1 = advance(encode(0), true);
  int receiver = t1.receiver_delta;
  int peak = receiver + 1;  // the arriving second sharing is held transiently
  auto t2 = advance(t1.next, true);
  receiver += t2.receiver_delta;
  EXPECT_EQ(t2.next.stage, Stage::Delivered);
  EXPECT_EQ(receiver, 0);
  EXPECT_EQ(peak, 2);
  EXPECT_EQ(t2.next.sender_units, 0);
}

TEST(Advance, SecondFailureStartsNextRound) {
  auto t = advance(at(0, 2, Stage::SendSecond), false);
  EXPECT_EQ(t.next.stage, Stage::SendFirst);
  EXPECT_EQ(t.next.round, 3);
  EXPECT_EQ(t.next.receiver_stored, 3);
  EXPECT_EQ(t.next.sender_units, 3);
  EXPECT_EQ(t.sender_delta, 1);
}

TEST(Advance, DeliveredIsTerminal) {
  QubitTransferState q;
  q.stage = Stage::Delivered;
  EXPECT_THROW(advance(q, true), Error);
}

TEST(Advance, AdversarialLossSequencesTerminate) {
  // Every loss pattern of length up to 12, followed by successes, ends in
  // Delivered with the receiver fully released and invariants held throughout.
  for (int len = 0; len <= 12; ++len)
    for (std::uint32_t mask = 0; mask < (1u << len); ++mask) {
      auto q = encode(0);
      int receiver = 0, sender = 3, steps = 0;
      auto step = [&](bool ok) {
        auto t = advance(q, ok);
        receiver += t.receiver_delta;
        sender += t.sender_delta;
        q = t.next;
        ++steps;
      };
      for (int i = 0; i < len && q.stage != Stage::Delivered; ++i) {
        step((mask >> i) & 1u);
        if (q.stage == Stage::SendFirst) ASSERT_EQ(q.receiver_stored, q.round);
        if (q.stage == Stage::SendSecond) ASSERT_EQ(q.receiver_stored, q.round + 1);
        if (q.stage != Stage::Delivered) {
          ASSERT_EQ(receiver, q.receiver_stored);
          ASSERT_EQ(sender, q.sender_units);
          ASSERT_LE(sender, 3);
          ASSERT_GE(sender, 1);
        }
      }
      while (q.stage != Stage::Delivered) step(true);
      ASSERT_EQ(receiver, 0);
      ASSERT_EQ(sender, 0);
      ASSERT_EQ(q.receiver_stored, 0);
      ASSERT_LE(steps, len + 2);
    }
}

TEST(Channel, Extremes) {
  auto rng = seeded_rng(0, "channel");
  for (int i = 0; i < 1000; ++i) {
    ASSERT_TRUE(sample_transmission({1.0}, rng));
    ASSERT_FALSE(sample_transmission({0.0}, rng));
  }
  EXPECT_THROW(sample_transmission({1.5}, rng), Error);
  EXPECT_THROW(sample_transmission({-0.1}, rng), Error);
}

TEST(Channel, HalfProbabilityConcentrates) {
  auto rng = seeded_rng(5, "channel");
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += sample_transmission({0.5}, rng);
  EXPECT_NEAR(hits / 100000.0, 0.5, 0.01);
}

TEST(Channel, IsolatedDeliveryAtCertainty) {
  auto rng = seeded_rng(1, "channel");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(isolated_delivery_slots({1.0}, rng), 2);
}

TEST(PlanSlot, FreshSessionSendsOneFirst) {
  auto h = source_hop(2);
  auto plan = plan_slot(h, 2, 100);
  EXPECT_EQ(plan.a2(), 0);
  EXPECT_EQ(plan.first_bound, 1);
  EXPECT_EQ(plan.a1(), 1);
  EXPECT_EQ(plan.new_encodes, 1);
}

TEST(PlanSlot, SecondsFirstThenBoundedFirsts) {
  auto h = source_hop(8);
  // Seconds at rounds 1, 1, 0 hold 2 + 2 + 1 = 5 firsts at the receiver.
  h.in_flight = {at(0, 0, Stage::SendSecond), at(1, 1, Stage::SendSecond), at(2, 1, Stage::SendSecond)};
  ASSERT_EQ(h.stored(), 5);
  auto plan = plan_slot(h, 8, 100);
  EXPECT_EQ(plan.a2(), 3);
  EXPECT_EQ(plan.first_bound, 2);  // max{0, 4 + 3 - 5}
  EXPECT_LE(plan.a1(), 2);
  EXPECT_EQ(plan.a1(), 0);  // s + a1 + a2 <= 8 leaves nothing
  EXPECT_EQ(plan.seconds.front(), 1u);  // largest round first, then smaller id
}

TEST(PlanSlot, PausesWhenStoredReachesWindow) {
  auto h = source_hop(4);
  h.in_flight = {at(0, 2, Stage::SendFirst), at(1, 2, Stage::SendFirst)};
  ASSERT_EQ(h.stored(), 4);
  auto plan = plan_slot(h, 4, 100);
  EXPECT_EQ(plan.a2(), 0);
  EXPECT_EQ(plan.a1(), 0);
}

TEST(PlanSlot, ReceiverFreeLimits) {
  auto h = source_hop(16);
  h.in_flight = {at(0, 0, Stage::SendSecond), at(1, 0, Stage::SendSecond)};
  auto plan = plan_slot(h, 16, 1);
  EXPECT_EQ(plan.a2(), 1);
  EXPECT_EQ(plan.a1(), 0);
  auto none = plan_slot(h, 16, 0);
  EXPECT_EQ(none.a1() + none.a2(), 0);
}

TEST(PlanSlot, EscapeHatchSendsSecondsAboveWindow) {
  // s = 6 > W = 4: the seconds still go out since delivering them frees memory.
  auto h = source_hop(4);
  h.in_flight = {at(0, 2, Stage::SendSecond), at(1, 2, Stage::SendSecond)};
  auto plan = plan_slot(h, 4, 10);
  EXPECT_EQ(plan.a2(), 2);
  EXPECT_EQ(plan.a1(), 0);
}

TEST(PlanSlot, SenderMemoryGatesFreshEncodes) {
  auto h = source_hop(8);
  auto plan = plan_slot(h, 8, 100, 5);
  EXPECT_EQ(plan.new_encodes, 1);
  auto relay = source_hop(8);
  relay.is_source = false;
  relay.queue_bound = 10;
  relay.queue = {7, 9};
  EXPECT_EQ(plan_slot(relay, 8, 100).new_encodes, 2);
  relay.queue.clear();
  EXPECT_EQ(plan_slot(relay, 8, 100).a1(), 0);
}

TEST(PlanSlot, RandomBudgetsHold) {
  auto rng = seeded_rng(3, "plan-test");
  for (int trial = 0; trial < 2000; ++trial) {
    const int w = 1 + static_cast<int>(rng.below(40));
    auto h = source_hop(w);
    const int n = static_cast<int>(rng.below(12));
    for (int i = 0; i < n; ++i)
      h.in_flight.push_back(at(i, static_cast<int>(rng.below(4)), rng.below(2) ? Stage::SendFirst : Stage::SendSecond));
    const int s = h.stored();
    const auto recv = static_cast<std::int64_t>(rng.below(60));
    auto plan = plan_slot(h, w, recv);
    ASSERT_LE(plan.a2(), s);
    ASSERT_LE(plan.a1() + plan.a2(), (3 * w) / 4);
    ASSERT_LE(plan.a1() + plan.a2(), recv);
    if (plan.a1() > 0) ASSERT_LE(s + plan.a1() + plan.a2(), w);
    ASSERT_LE(plan.a1(), std::max(0, w / 2 + plan.a2() - s));
  }
}

TEST(Transmit, OneQubitEveryTwoSlotsAtWindowTwo) {
  auto h = source_hop(2);
  auto rng = seeded_rng(0, "channel");
  std::vector<int> delivered;
  for (int slot = 0; slot < 8; ++slot) {
    auto plan = plan_slot(h, 2, 100);
    auto r = transmit(h, plan, {1.0}, rng);
    delivered.push_back(static_cast<int>(r.delivered.size()));
  }
  EXPECT_EQ(delivered, (std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1}));
}

TEST(Transmit, BacklogDrains) {
  auto h = source_hop(8);
  h.backlog = 2;
  auto rng = seeded_rng(0, "channel");
  auto r1 = transmit(h, plan_slot(h, 8, 100), {1.0}, rng);
  EXPECT_EQ(r1.firsts_sent, 2);
  EXPECT_EQ(*h.backlog, 0);
  auto r2 = transmit(h, plan_slot(h, 8, 100), {1.0}, rng);
  EXPECT_EQ(r2.seconds_sent, 2);
  EXPECT_EQ(r2.delivered, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_TRUE(h.idle());
}

TEST(Relay, ForwardRespectsQueueBound) {
  TagHopSession next;
  next.queue_bound = 2;
  relay_forward(next, 1);
  relay_forward(next, 2);
  EXPECT_EQ(next.queue_room(), 0u);
  try {
    relay_forward(next, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::capacity_exceeded);
  }
}

TEST(WindowTag, Rules) {
  TagHopSession fresh;
  EXPECT_EQ(fresh.window, 2);
  EXPECT_EQ(kTagInitialWindow, 2);

  auto h = source_hop(9);
  h.phase = Phase::CongestionAvoidance;
  window_update_tag(h, false);
  EXPECT_EQ(h.window, 10);

  auto c = source_hop(9);
  c.phase = Phase::CongestionAvoidance;
  EXPECT_EQ(granted_window(9, true), 4);
  window_update_tag(c, true);
  EXPECT_EQ(c.window, 5);
}

TEST(ReserveTag, SendCostNineQuarters) {
  Topology t;
  NodeId a = t.add_node(NodeKind::Host, {}, 1000);
  NodeId b = t.add_node(NodeKind::Host, {}, 1000);
  t.kind = NetworkKind::TagQdnS;
  PoolSet pools(t);
  auto h = source_hop(4);
  h.sender = a;
  h.receiver = b;
  std::vector<TagHopSession*> hops{&h};
  reserve_tag(hops, pools);
  EXPECT_EQ(h.send_units, 9);
  EXPECT_EQ(pools.at({a, PoolKind::Send}).reserved(), 9);
  EXPECT_EQ(pools.at({b, PoolKind::Receive}).reserved(), 4);
}

TEST(ReserveTag, FreshWindowTwo) {
  Topology t;
  t.kind = NetworkKind::TagQdnS;
  NodeId a = t.add_node(NodeKind::Host, {}, 1000);
  NodeId b = t.add_node(NodeKind::Host, {}, 1000);
  PoolSet pools(t);
  auto h = source_hop(2);
  h.sender = a;
  h.receiver = b;
  std::vector<TagHopSession*> hops{&h};
  reserve_tag(hops, pools);
  EXPECT_FALSE(h.ce);
  EXPECT_EQ(pools.at({a, PoolKind::Send}).reserved(), 5);
  EXPECT_EQ(pools.at({b, PoolKind::Receive}).reserved(), 2);
}

TEST(ReserveTag, StoredFirstsFloorTheReceiveGrant) {
  Topology t;
  t.kind = NetworkKind::TagQdnS;
  NodeId a = t.add_node(NodeKind::Host, {}, 1000);
  NodeId b = t.add_node(NodeKind::Host, {}, 1000);
  t.nodes[b.index].split = PoolSplit{0, 3};
  PoolSet pools(t);
  auto h = source_hop(4);
  h.sender = a;
  h.receiver = b;
  h.in_flight = {at(0, 2, Stage::SendSecond)};  // s = 3
  std::vector<TagHopSession*> hops{&h};
  reserve_tag(hops, pools);
  EXPECT_TRUE(h.ce);
  EXPECT_EQ(h.granted, 2);
  EXPECT_EQ(h.receive_units, 3);
  EXPECT_EQ(pools.at({b, PoolKind::Receive}).reserved(), 3);
}

TEST(ReserveTag, StoredFirstsBeyondPoolIsDeadlock) {
  Topology t;
  t.kind = NetworkKind::TagQdnS;
  NodeId a = t.add_node(NodeKind::Host, {}, 1000);
  NodeId b = t.add_node(NodeKind::Host, {}, 1000);
  t.nodes[b.index].split = PoolSplit{0, 2};
  PoolSet pools(t);
  auto h = source_hop(4);
  h.sender = a;
  h.receiver = b;
  h.in_flight = {at(0, 2, Stage::SendSecond)};
  std::vector<TagHopSession*> hops{&h};
  try {
    reserve_tag(hops, pools);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::deadlock_detected);
  }
}

TEST(ReserveTag, FreshSessionWaitsForAFullPool) {
  Topology t;
  t.kind = NetworkKind::TagQdnS;
  NodeId a = t.add_node(NodeKind::Host, {}, 1000);
  NodeId b = t.add_node(NodeKind::Host, {}, 1000);
  t.nodes[b.index].split = PoolSplit{0, 4};
  PoolSet pools(t);
  auto old = source_hop(8);
  old.sender = a;
  old.receiver = b;
  old.started = true;
  auto fresh = source_hop(2);
  fresh.flow = FlowKey{1, 0};
  fresh.sender = a;
  fresh.receiver = b;
  std::vector<TagHopSession*> hops{&old, &fresh};
  reserve_tag(hops, pools);
  EXPECT_TRUE(fresh.deferred);
  EXPECT_FALSE(fresh.started);
  EXPECT_EQ(fresh.window, 2);
  EXPECT_EQ(pools.at({b, PoolKind::Receive}).reserved_by(fresh.flow), 0);
  EXPECT_FALSE(old.deferred);
  EXPECT_EQ(old.granted, 4);
  EXPECT_EQ(pools.at({b, PoolKind::Receive}).reserved(), 4);
}

TEST(ReserveTag, IncumbentsAloneStillReportInfeasible) {
  Topology t;
  t.kind = NetworkKind::TagQdnS;
  NodeId a = t.add_node(NodeKind::Host, {}, 1000);
  NodeId b = t.add_node(NodeKind::Host, {}, 1000);
  t.nodes[b.index].split = PoolSplit{0, 3};
  PoolSet pools(t);
  auto h = source_hop(8);
  h.sender = a;
  h.receiver = b;
  h.started = true;
  std::vector<TagHopSession*> hops{&h};
  try {
    reserve_tag(hops, pools);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::infeasible_reservation);
  }
}
