#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pipeforge/config.hpp"
#include "pipeforge/demos.hpp"
#include "pipeforge/env.hpp"

namespace pipeforge {

struct TeleopOptions {
  std::string record_dir = ".";
  double kp = 200.0;  // N/m
  double kd = 20.0;   // N s/m
};

/// One operator's session: the env, the PD drive toward the operator's target, and
/// recording. Not thread-safe; the server funnels every call through one strand.
class TeleopSession {
 public:
  TeleopSession(Config config, TeleopOptions options);

  /// Applies one client frame. Returns the frames to send back (possibly none).
  std::vector<std::string> handle_message(std::string_view text);

  /// Advances the env one frame (unless the episode has ended) and returns the state frame.
  std::string tick();
  std::string state_message() const;

  long ticks() const { return ticks_; }
  bool recording() const { return recording_; }
  std::size_t recorded_steps() const { return force_.transitions.size(); }
  const PipeEnv& env() const { return env_; }
  const Vec3& target() const { return target_; }
  /// PD drive toward the target, before the env's clamp.
  Vec3 drive_force() const;

 private:
  std::string save(ObsMode group);
  void reset(Condition condition, std::uint64_t seed);

  Config config_;
  TeleopOptions options_;
  PipeEnv env_;
  std::string config_hash_;
  Vec3 target_;
  long ticks_ = 0;
  bool recording_ = false;
  Condition condition_ = Condition::kFixed;
  std::uint64_t seed_ = 0;
  Demonstration force_;
  Demonstration visual_;
  int saved_count_ = 0;
};

/// WebSocket endpoint serving one TeleopSession to at most one client at a time.
class TeleopServer {
 public:
  /// Binds immediately; port 0 picks a free port. Throws std::runtime_error when the
  /// port is unavailable.
  TeleopServer(Config config, TeleopOptions options, unsigned short port, double tick_hz = 50.0);
  ~TeleopServer();

  unsigned short port() const;
  /// Serves until stop() is called.
  void run();
  /// Safe to call from any thread.
  void stop();
  /// Ticks processed so far (only advances while a client is connected).
  long ticks() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pipeforge
