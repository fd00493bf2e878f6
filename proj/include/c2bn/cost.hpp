#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace c2bn::nn {

// Counting convention (per sample, inference):
//   linear in->out   params = in*out + out, FLOPs = in*out
//                    (one multiply-accumulate = 1 FLOP; bias and activations free)
//   norm of width w  params = 2w (one affine pair), FLOPs = 4w
// A conditional norm additionally reports its full bank, 2w * classes, as the
// "trainable" count.
struct LayerSpec {
    enum class Kind { linear, norm };
    Kind kind = Kind::linear;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t classes = 1;  // norm only; > 1 means class-conditional

    static LayerSpec linear(std::size_t in, std::size_t out) {
        return {Kind::linear, in, out, 1};
    }
    static LayerSpec norm(std::size_t width, std::size_t classes = 1) {
        return {Kind::norm, width, width, classes};
    }
};

struct ComponentSpec {
    std::string name;
    std::vector<LayerSpec> layers;
};

struct ArchDescriptor {
    std::vector<ComponentSpec> components;
};

struct CostEntry {
    std::string name;
    std::uint64_t params = 0;            // counting convention above
    std::uint64_t flops = 0;
    std::uint64_t trainable_params = 0;  // every stored trainable scalar
};

struct CostReport {
    std::vector<CostEntry> components;
    CostEntry total;
};

CostReport count_params_flops(const ArchDescriptor& arch);

}  // namespace c2bn::nn
