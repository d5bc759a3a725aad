#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "qtp/memory.hpp"
#include "qtp/rng.hpp"
#include "qtp/window.hpp"

namespace qtp {

// ---------------------------------------------------------------------------
// Per-qubit (2,3)-threshold delivery state machine

enum class Stage { SendFirst, SendSecond, Delivered };

constexpr std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::SendFirst: return "SendFirst";
    case Stage::SendSecond: return "SendSecond";
    case Stage::Delivered: return "Delivered";
  }
  return "?";
}

/// Where one data qubit stands. In round k the sender holds the three
/// sharings of the round-k secret (the data qubit itself for k = 0, the
/// previous round's third sharing otherwise); the receiver holds every first
/// sharing that has arrived so far.
struct QubitTransferState {
  std::uint64_t qubit = 0;
  int round = 0;
  Stage stage = Stage::SendFirst;
  int receiver_stored = 0;
  int sender_units = 3;
};

inline constexpr int kSharingsPerQubit = 3;

inline QubitTransferState encode(std::uint64_t qubit) {
  return QubitTransferState{qubit, 0, Stage::SendFirst, 0, kSharingsPerQubit};
}

/// Encodes only if the sender's allocation has room for three sharings;
/// otherwise the qubit stays queued.
inline std::optional<QubitTransferState> try_encode(std::uint64_t qubit, std::int64_t& free_units) {
  if (free_units < kSharingsPerQubit) return std::nullopt;
  free_units -= kSharingsPerQubit;
  return encode(qubit);
}

struct Transition {
  QubitTransferState next;
  int sender_delta = 0;
  int receiver_delta = 0;
};

/// One slot's outcome for the sharing sent for `st`.
///
///   SendFirst(k)  + fail    -> SendFirst(k)    recover from the two retained sharings, re-encode
///   SendFirst(k)  + success -> SendSecond(k)   receiver stores it
///   SendSecond(k) + fail    -> SendFirst(k+1)  re-encode the retained third sharing
///   SendSecond(k) + success -> Delivered       receiver frees all k+1 stored firsts
inline Transition advance(const QubitTransferState& st, bool success) {
  if (st.stage == Stage::Delivered) throw Error(Errc::invalid_argument, "qubit already delivered");
  Transition t{st, 0, 0};
  if (st.stage == Stage::SendFirst) {
    if (success) {
      t.next.stage = Stage::SendSecond;
      t.next.receiver_stored = st.receiver_stored + 1;
      t.next.sender_units = 2;
      t.sender_delta = -1;
      t.receiver_delta = +1;
    }
    return t;
  }
  if (success) {
    t.next.stage = Stage::Delivered;
    t.next.receiver_stored = 0;
    t.next.sender_units = 0;
    t.sender_delta = -st.sender_units;
    t.receiver_delta = -st.receiver_stored;
  } else {
    t.next.stage = Stage::SendFirst;
    t.next.round = st.round + 1;
    t.next.sender_units = kSharingsPerQubit;
    t.sender_delta = kSharingsPerQubit - st.sender_units;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Lossy channel

struct ChannelModel {
  double p = 1.0;  // per-sharing success probability
};

inline bool sample_transmission(const ChannelModel& c, RandomStream& rng) {
  if (!(c.p >= 0.0 && c.p <= 1.0)) throw Error(Errc::invalid_argument, "success probability outside [0,1]");
  return rng.bernoulli(c.p);
}

/// Slots one lone qubit needs to cross one hop with no memory limits.
inline int isolated_delivery_slots(const ChannelModel& c, RandomStream& rng) {
  auto st = encode(0);
  int slots = 0;
  while (st.stage != Stage::Delivered) {
    ++slots;
    st = advance(st, sample_transmission(c, rng)).next;
  }
  return slots;
}

// ---------------------------------------------------------------------------
// Hop sessions

/// One TAG-QTP hop: an end-to-end session over a switched network has a single
/// hop; over a relay network it has one per link.
struct TagHopSession {
  FlowKey flow;
  NodeId sender;
  NodeId receiver;
  int window = 2;
  Phase phase = Phase::SlowStart;
  std::optional<int> window_cap;

  bool is_source = false;
  bool is_final = false;
  std::optional<std::int64_t> backlog;  // source hop only; nullopt = unbounded
  std::uint64_t next_qubit = 0;         // source hop id counter
  std::deque<std::uint64_t> queue;      // relay hop: reconstructed qubits awaiting encoding
  std::size_t queue_bound = 0;

  std::vector<QubitTransferState> in_flight;  // ascending qubit id

  bool started = false;  // granted a slot at least once

  // Per-slot reservation results.
  bool deferred = false;  // waiting for memory; takes no part in this slot
  bool ce = false;
  int granted = 0;
  std::int64_t send_units = 0;
  std::int64_t receive_units = 0;

  int stored() const {
    int s = 0;
    for (const auto& q : in_flight) s += q.receiver_stored;
    return s;
  }
  int sender_units() const {
    int s = 0;
    for (const auto& q : in_flight) s += q.sender_units;
    return s;
  }
  int pending_seconds() const {
    return static_cast<int>(std::count_if(in_flight.begin(), in_flight.end(),
                                          [](const auto& q) { return q.stage == Stage::SendSecond; }));
  }
  /// Qubits that could still be encoded on this hop.
  std::int64_t available_new() const {
    if (is_source) return backlog ? *backlog : INT64_MAX;
    return static_cast<std::int64_t>(queue.size());
  }
  std::size_t queue_room() const { return queue.size() >= queue_bound ? 0 : queue_bound - queue.size(); }
  bool idle() const { return in_flight.empty() && available_new() == 0; }
};

struct SlotPlan {
  std::vector<std::uint64_t> seconds;  // a2 qubits
  std::vector<std::uint64_t> firsts;   // already-encoded qubits resending a first sharing
  int new_encodes = 0;                 // fresh qubits encoded and sent as firsts
  int first_bound = 0;                 // max{0, floor(W/2) + a2 - s}

  int a1() const { return static_cast<int>(firsts.size()) + new_encodes; }
  int a2() const { return static_cast<int>(seconds.size()); }
};

/// Chooses this slot's sharings for one hop.
///
/// Seconds go first, largest round first, limited by the stored firsts s, the
/// receiver's free units, the floor(3W/4) qubit budget and the sender room
/// needed to re-encode a lost second. Firsts are then bounded by
///   a1 <= max{0, floor(W/2) + a2 - s},  s + a1 + a2 <= W,
///   a1 + a2 <= floor(3W/4),             a1 + a2 <= receiver free,
/// with in-flight qubits (largest round first) ahead of fresh encodings, which
/// need three free sender units each. Seconds are not held to s + a2 <= W: a
/// delivered second frees k+2 units at the receiver.
inline SlotPlan plan_slot(const TagHopSession& h, int window, std::int64_t receiver_free,
                          std::int64_t sender_free = INT64_MAX / 4) {
  SlotPlan plan;
  if (window <= 0) return plan;
  receiver_free = std::max<std::int64_t>(receiver_free, 0);
  sender_free = std::max<std::int64_t>(sender_free, 0);
  const int s = h.stored();
  const int qubit_budget = (3 * window) / 4;

  std::vector<const QubitTransferState*> seconds, firsts;
  for (const auto& q : h.in_flight) {
    if (q.stage == Stage::SendSecond) seconds.push_back(&q);
    else if (q.stage == Stage::SendFirst) firsts.push_back(&q);
  }
  auto by_round = [](const QubitTransferState* a, const QubitTransferState* b) {
    if (a->round != b->round) return a->round > b->round;
    return a->qubit < b->qubit;
  };
  std::sort(seconds.begin(), seconds.end(), by_round);
  std::sort(firsts.begin(), firsts.end(), by_round);

  std::int64_t a2 = std::min<std::int64_t>({static_cast<std::int64_t>(seconds.size()), s, receiver_free,
                                            qubit_budget, sender_free});
  for (std::int64_t i = 0; i < a2; ++i) plan.seconds.push_back(seconds[i]->qubit);
  sender_free -= a2;

  plan.first_bound = std::max<int>(0, window / 2 + static_cast<int>(a2) - s);
  std::int64_t a1 = std::min<std::int64_t>({plan.first_bound, qubit_budget - a2, receiver_free - a2,
                                            std::max<std::int64_t>(0, window - s - a2)});
  a1 = std::max<std::int64_t>(a1, 0);

  std::int64_t resend = std::min<std::int64_t>(a1, static_cast<std::int64_t>(firsts.size()));
  for (std::int64_t i = 0; i < resend; ++i) plan.firsts.push_back(firsts[i]->qubit);
  std::int64_t fresh = std::min({a1 - resend, h.available_new(), sender_free / kSharingsPerQubit});
  plan.new_encodes = static_cast<int>(std::max<std::int64_t>(fresh, 0));
  return plan;
}

struct HopSlotResult {
  int firsts_sent = 0;
  int seconds_sent = 0;
  int losses = 0;
  std::vector<std::uint64_t> delivered;  // qubit ids reconstructed at the receiver
};

/// Encodes the planned fresh qubits, samples one outcome per sent sharing in
/// ascending qubit order, and advances each state machine.
inline HopSlotResult transmit(TagHopSession& h, const SlotPlan& plan, const ChannelModel& channel,
                              RandomStream& rng) {
  HopSlotResult r;
  std::vector<std::uint64_t> sent = plan.seconds;
  sent.insert(sent.end(), plan.firsts.begin(), plan.firsts.end());
  for (int i = 0; i < plan.new_encodes; ++i) {
    std::uint64_t id;
    if (h.is_source) {
      id = h.next_qubit++;
      if (h.backlog) --*h.backlog;
    } else {
      if (h.queue.empty()) throw Error(Errc::invalid_argument, "plan encodes more qubits than queued");
      id = h.queue.front();
      h.queue.pop_front();
    }
    h.in_flight.push_back(encode(id));
    sent.push_back(id);
  }
  std::sort(h.in_flight.begin(), h.in_flight.end(),
            [](const auto& a, const auto& b) { return a.qubit < b.qubit; });
  std::sort(sent.begin(), sent.end());

  for (auto& q : h.in_flight) {
    if (!std::binary_search(sent.begin(), sent.end(), q.qubit)) continue;
    const bool was_first = q.stage == Stage::SendFirst;
    (was_first ? r.firsts_sent : r.seconds_sent) += 1;
    bool ok = sample_transmission(channel, rng);
    if (!ok) ++r.losses;
    q = advance(q, ok).next;
    if (q.stage == Stage::Delivered) r.delivered.push_back(q.qubit);
  }
  std::erase_if(h.in_flight, [](const auto& q) { return q.stage == Stage::Delivered; });
  return r;
}

/// Hands a qubit reconstructed at a relay to that relay's next hop.
inline void relay_forward(TagHopSession& next, std::uint64_t qubit) {
  if (next.queue.size() >= next.queue_bound)
    throw Error(Errc::capacity_exceeded, "relay queue full");
  next.queue.push_back(qubit);
}

/// TAG window rule: starts at 2 and, in CA, grows by one every slot whatever
/// was delivered.
inline void window_update_tag(TagHopSession& h, bool ce) {
  auto next = next_window({h.window, h.phase}, ce, h.window_cap);
  h.window = next.window;
  h.phase = next.phase;
}

inline constexpr int kTagInitialWindow = 2;

/// TAG reservation for one slot over all active hop sessions.
///
/// Send pools run QMA with 9/4 units per window unit, floored at the units the
/// sender already holds; receive pools run QMA with 1 unit per window unit,
/// floored at the stored first sharings. A hop's CE is the OR of both ends.
///
/// A fresh session still costs 3 send units and 1 receive unit per hop after
/// halving, which a pool filled by incumbents may not have. When a pool is
/// infeasible, the most recently admitted session that has never been granted
/// is deferred (all its hops) and the slot is retried. Incumbents alone never
/// trigger this; if they do, the error propagates.
inline void reserve_tag(std::span<TagHopSession* const> hops, PoolSet& pools) {
  struct Member {
    std::size_t hop;
    Rational a;
    int floor;
  };
  std::set<SessionId> deferred;
  std::vector<char> ce;
  for (;;) {
    std::map<PoolRef, std::vector<Member>> by_pool;
    for (std::size_t i = 0; i < hops.size(); ++i) {
      const auto* h = hops[i];
      if (deferred.count(h->flow.session)) continue;
      PoolRef send{h->sender, PoolKind::Send}, recv{h->receiver, PoolKind::Receive};
      if (pools.has(send)) by_pool[send].push_back({i, factor::tag_send, h->sender_units()});
      if (pools.has(recv)) by_pool[recv].push_back({i, factor::receive, h->stored()});
    }
    ce.assign(hops.size(), 0);
    try {
      for (const auto& [ref, members] : by_pool) {
        std::vector<Demand> demands;
        for (const auto& m : members)
          demands.push_back(Demand{hops[m.hop]->flow, hops[m.hop]->window, m.a, m.floor});
        auto grants = qma(demands, pools.at(ref).capacity());
        for (std::size_t k = 0; k < members.size(); ++k)
          if (grants[k].ce) ce[members[k].hop] = 1;
      }
      break;
    } catch (const Error& e) {
      if (e.code() != Errc::infeasible_reservation) throw;
      std::optional<SessionId> latest;
      for (const auto* h : hops)
        if (!h->started && !deferred.count(h->flow.session) && (!latest || h->flow.session > *latest))
          latest = h->flow.session;
      if (!latest) throw;
      deferred.insert(*latest);
    }
  }
  for (std::size_t i = 0; i < hops.size(); ++i) {
    auto* h = hops[i];
    h->deferred = deferred.count(h->flow.session) != 0;
    if (h->deferred) {
      h->ce = false;
      h->granted = 0;
      h->send_units = h->receive_units = 0;
      continue;
    }
    h->started = true;
    h->ce = ce[i] != 0;
    h->granted = granted_window(h->window, h->ce);
    h->send_units = std::max<std::int64_t>(factor::tag_send.ceil_mul(h->granted), h->sender_units());
    h->receive_units = std::max<std::int64_t>(h->granted, h->stored());
    PoolRef send{h->sender, PoolKind::Send}, recv{h->receiver, PoolKind::Receive};
    if (pools.has(send)) pools.at(send).reserve(h->flow, h->send_units);
    if (pools.has(recv)) pools.at(recv).reserve(h->flow, h->receive_units);
  }
}

}  // namespace qtp
