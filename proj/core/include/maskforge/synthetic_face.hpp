#pragma once

#include <cstdint>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"
#include "maskforge/parsing.hpp"

namespace maskforge {

/// Flat-shaded stand-in for a no-makeup portrait: a skin-coloured face with
/// eyes, brows, nose and lips drawn from jittered canonical landmarks, plus a
/// matching CelebAMask-HQ style parsing map. Used for self-synthesis tests,
/// the evaluation protocol and demos.
struct SyntheticFaceOptions {
    Size size{256, 256};
    /// Face scale relative to the canonical frame fitted to `size`.
    double scale_min = 0.85;
    double scale_max = 1.0;
    double max_rotation_deg = 6.0;
    /// Centre offset as a fraction of the frame side.
    double max_shift = 0.04;
    /// Independent per-landmark offset, pixels.
    double landmark_jitter = 0.5;
    /// Uniform per-channel pixel noise amplitude (0 keeps the skin flat).
    double noise = 0.0;
};

struct SyntheticFace {
    ImageRgb image;
    LandmarkSet landmarks;
    LabelMap parsing;
    Rgb skin;
};

SyntheticFace make_synthetic_face(const CanonicalLayout& canon, std::uint64_t seed,
                                  const SyntheticFaceOptions& options = {});

}  // namespace maskforge
