#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "absim/behavior.hpp"
#include "absim/handle.hpp"
#include "absim/spinlock.hpp"
#include "absim/vec3.hpp"

namespace absim {

// Spherical agent. Geometry writes from behaviors are deferred: translate()
// and grow() accumulate deltas that the integration step applies at a
// barrier, so results do not depend on the order in which agents are
// processed within an iteration.
class Agent final {
 public:
  static constexpr int kMaxBehaviors = 6;

  Agent(AgentUid uid, const Vec3& position, double diameter)
      : uid_(uid), position_(position), diameter_(diameter) {
    if (!(diameter > 0.0)) throw std::invalid_argument("diameter must be > 0");
  }

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  AgentUid uid() const { return uid_; }
  const Vec3& position() const { return position_; }
  double diameter() const { return diameter_; }

  std::uint32_t tag() const { return tag_; }
  void set_tag(std::uint32_t t) { tag_ = t; }

  // Deferred geometry updates, applied by the integration step.
  void translate(const Vec3& delta) { pending_translation_ += delta; }
  void grow(double diameter_delta) { pending_growth_ += diameter_delta; }
  double pending_growth() const { return pending_growth_; }

  // Immediate setters for initialization and the integration step only.
  void set_position(const Vec3& p) { position_ = p; }
  void set_diameter(double d) {
    if (!(d > 0.0)) throw std::invalid_argument("diameter must be > 0");
    diameter_ = d;
  }

  // Behaviors are stored inline; agents carry few of them.
  void add_behavior(Behavior* b) {
    if (behavior_count_ == kMaxBehaviors) {
      throw std::length_error("too many behaviors on one agent");
    }
    behaviors_[behavior_count_++] = b;
  }
  std::span<Behavior* const> behaviors() const {
    return {behaviors_, static_cast<std::size_t>(behavior_count_)};
  }

  // --- staticness bookkeeping (see mechanics) ---

  bool is_static() const { return is_static_; }
  void set_static(bool v) { is_static_ = v; }

  bool moved_this_iteration() const { return moved_; }
  bool grew_this_iteration() const { return grew_; }
  void set_moved() { moved_ = true; }
  void set_grew() { grew_ = true; }

  // For attribute changes that can increase the force on this agent alone
  // (no propagation to neighbors).
  void mark_self_force_change() { self_force_change_ = true; }
  bool self_force_change() const { return self_force_change_; }

  void flag_neighbor_violation() {
    neighbor_violation_.store(true, std::memory_order_relaxed);
  }
  bool neighbor_violation() const {
    return neighbor_violation_.load(std::memory_order_relaxed);
  }
  void flag_new_neighbor() {
    new_neighbor_.store(true, std::memory_order_relaxed);
  }
  bool new_neighbor() const {
    return new_neighbor_.load(std::memory_order_relaxed);
  }

  // Set on daughters created during a simulation; consumed (and cleared)
  // by the staticness pass of the following iteration.
  void mark_newly_added() { newly_added_ = true; }
  bool newly_added() const { return newly_added_; }

  void reset_iteration_flags() {
    moved_ = false;
    grew_ = false;
    self_force_change_ = false;
    newly_added_ = false;
    neighbor_violation_.store(false, std::memory_order_relaxed);
    new_neighbor_.store(false, std::memory_order_relaxed);
  }

  std::uint32_t nonzero_force_partners() const {
    return nonzero_force_partners_;
  }
  void set_nonzero_force_partners(std::uint32_t c) {
    nonzero_force_partners_ = c;
  }
  const Vec3& last_force() const { return last_force_; }
  void set_last_force(const Vec3& f) { last_force_ = f; }

  // --- integration (engine internal) ---

  // Applies pending deltas; returns the displacement magnitude applied.
  double apply_pending(double max_displacement) {
    double disp = pending_translation_.norm();
    if (disp > 0.0) {
      if (disp > max_displacement) {
        pending_translation_ *= max_displacement / disp;
        disp = max_displacement;
      }
      position_ += pending_translation_;
      moved_ = true;
    }
    if (pending_growth_ != 0.0) {
      double d = diameter_ + pending_growth_;
      diameter_ = d > 1e-9 ? d : 1e-9;
      if (pending_growth_ > 0.0) grew_ = true;
    }
    pending_translation_ = {};
    pending_growth_ = 0.0;
    return disp;
  }

  // --- removal staging (exactly-once guard) ---
  bool try_stage_removal() {
    return !staged_removal_.exchange(true, std::memory_order_acq_rel);
  }
  void clear_staged_removal() {
    staged_removal_.store(false, std::memory_order_relaxed);
  }

  SpinLock& mutation_lock() { return lock_; }

  std::uint64_t* rng_counter() { return &rng_counter_; }

  // Copies everything except identity, geometry, and behaviors; used when an
  // agent is re-homed into another memory arena.
  void copy_soft_state(const Agent& src) {
    pending_translation_ = src.pending_translation_;
    pending_growth_ = src.pending_growth_;
    last_force_ = src.last_force_;
    nonzero_force_partners_ = src.nonzero_force_partners_;
    tag_ = src.tag_;
    is_static_ = src.is_static_;
    moved_ = src.moved_;
    grew_ = src.grew_;
    self_force_change_ = src.self_force_change_;
    newly_added_ = src.newly_added_;
    rng_counter_ = src.rng_counter_;
    neighbor_violation_.store(src.neighbor_violation(),
                              std::memory_order_relaxed);
    new_neighbor_.store(src.new_neighbor(), std::memory_order_relaxed);
    staged_removal_.store(src.staged_removal_.load(std::memory_order_relaxed),
                          std::memory_order_relaxed);
  }

 private:
  AgentUid uid_;
  Vec3 position_;
  double diameter_;
  Vec3 pending_translation_;
  double pending_growth_ = 0.0;
  Vec3 last_force_;
  std::uint32_t nonzero_force_partners_ = 0;
  std::uint32_t tag_ = 0;

  bool is_static_ = false;
  bool moved_ = false;
  bool grew_ = false;
  bool self_force_change_ = false;
  bool newly_added_ = false;
  std::atomic<bool> neighbor_violation_{false};
  std::atomic<bool> new_neighbor_{false};
  std::atomic<bool> staged_removal_{false};
  SpinLock lock_;

  std::uint64_t rng_counter_ = 0;
  std::uint8_t behavior_count_ = 0;
  Behavior* behaviors_[kMaxBehaviors] = {};
};

}  // namespace absim
