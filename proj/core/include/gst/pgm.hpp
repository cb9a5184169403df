#pragma once

#include <functional>
#include <string>

#include "gst/tensor.hpp"

namespace gst {

// Binary PGM (P5, maxval 255). Values quantize as round(v*255); reloading
// maps back to v/255, so one round trip moves a pixel by at most 1/510.
void write_pgm(const Tensor& image, const std::string& path);
Tensor read_pgm(const std::string& path);

// Observation hook for every read_pgm call. Tests use it to prove the
// training paths never open the target-domain oracle images.
void set_pgm_read_hook(std::function<void(const std::string&)> hook);

}  // namespace gst
