#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lfd/trace.hpp"

namespace lfd {

enum class PhaseKind { Free, Contact };

/// One scripted hand-path phase. The tip interpolates linearly from
/// `tip_from` to `tip_to` over `frames` frames. Contact phases slide the tip
/// along the top face of `contact_object`; a peel ramp raises that object's
/// peel fraction across the phase.
struct HandPhase {
  PhaseKind kind = PhaseKind::Free;
  int frames = 0;
  Vec3 tip_from{Vec3::Zero()};
  Vec3 tip_to{Vec3::Zero()};
  int contact_object = -1;
  bool peel_ramp = false;
  double peel_to = 0.0;
};

struct ScenarioObject {
  int id = -1;
  std::string cls;
  Vec3 centroid{Vec3::Zero()};  // ignored for the attached object, which rides with the hand
};

/// Declarative demonstration scenario: object layout, scripted hand path
/// with declared contact intervals, and recording-noise amplitude. Also
/// carries the environment-side settings (force noise, seed) so one file
/// describes both the demonstration and the execution world.
struct ScenarioSpec {
  std::string name;
  std::vector<ScenarioObject> objects;
  int attached_object = -1;  // tool held in the hand, or -1
  double noise_amplitude = 0.0;
  std::vector<HandPhase> phases;

  bool force_noise = false;
  uint64_t env_seed = 0;
};

struct SynthesizedDemo {
  DemonstrationTrace trace;
  GroundTruth truth;
};

/// Recording geometry shared by the generator and its tests.
namespace demo_geom {
inline constexpr double kFps = 30.0;
inline const Vec3 kHandOffset{0.0, 0.0, 0.055};    // palm center above the tip
inline const Vec3 kWristOffset{-0.05, 0.0, 0.115};
}  // namespace demo_geom

/// Deterministically synthesizes a demonstration trace from a scenario.
/// The declared contact intervals are recoverable by the segmentation
/// module by construction; ground truth is returned alongside. Rejects
/// scenarios with overlapping objects, excessive noise, or scripts whose
/// contact margins would not survive the noise amplitude.
SynthesizedDemo synthesize_trace(const ScenarioSpec& scenario, uint64_t seed,
                                 const ObjectDatabase* db = nullptr);

/// The peel demonstration: approach the vegetable, press on, drag a strip
/// along the top face; the recording ends during contact.
ScenarioSpec peel_scenario(const std::string& cls = "cucumber");

/// A hand-held peeler making and breaking contact with a vegetable
/// (object-object contact features instead of hand-object).
ScenarioSpec tool_contact_scenario();

/// A wander with no contact at all.
ScenarioSpec no_contact_scenario();

/// Random scenario for segmentation fuzzing: up to 5 objects, up to 500
/// frames, optional tool in hand, 0-3 contact episodes, small noise. Pure
/// function of the seed.
ScenarioSpec random_scenario(uint64_t seed);

/// Fraction of the top face swept by a straight blade pass between two
/// x-offsets from the object center (the generator's own peel bookkeeping).
double strip_fraction(const ObjectClassInfo& cls, double x0, double x1, double blade_width);

/// Scenario files are JSON (comments allowed).
ScenarioSpec load_scenario(const std::string& path);
void save_scenario(const ScenarioSpec& spec, const std::string& path);

/// Resolves a builtin scenario name (peel_cucumber, peel_potato,
/// peel_carrot, tool_contact, no_contact, fuzz:<seed>) or falls back to
/// loading `name` as a file path.
ScenarioSpec resolve_scenario(const std::string& name);

}  // namespace lfd
