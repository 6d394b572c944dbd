#pragma once

#include <cstddef>

namespace absim {

class Agent;
class AgentContext;

// Per-agent callable executed once per iteration (subject to the agent-op
// frequency). A behavior may mutate its own agent directly; structural
// changes (division, death) and neighbor writes must go through the
// AgentContext helpers.
class Behavior {
 public:
  virtual ~Behavior() = default;

  virtual void run(Agent& self, AgentContext& ctx) = 0;

  // Placement-copies this behavior into `mem` (allocation_size() bytes).
  virtual Behavior* clone_into(void* mem) const = 0;
  virtual std::size_t allocation_size() const = 0;

  bool copy_to_daughter() const { return copy_to_daughter_; }
  void set_copy_to_daughter(bool v) { copy_to_daughter_ = v; }

 private:
  bool copy_to_daughter_ = true;
};

template <class Derived>
class BehaviorBase : public Behavior {
 public:
  Behavior* clone_into(void* mem) const override {
    return new (mem) Derived(static_cast<const Derived&>(*this));
  }
  std::size_t allocation_size() const override { return sizeof(Derived); }
};

}  // namespace absim
