#pragma once

namespace rpnet {

// Body geometry element rigidly attached to kinematic frames. Spheres sit at
// a single frame origin; cylinders span the segment between the origins of
// two consecutive frames.
struct PrimitiveShape {
    enum class Kind { Sphere, Cylinder };

    Kind kind = Kind::Sphere;
    int frame_a = 0;     // attachment frame (sphere center, cylinder start)
    int frame_b = 0;     // cylinder end frame; must be frame_a + 1
    double radius = 0.0; // meters
};

} // namespace rpnet
