#include "c2bn/cost.hpp"

namespace c2bn::nn {

CostReport count_params_flops(const ArchDescriptor& arch) {
    CostReport report;
    report.total.name = "total";
    for (const ComponentSpec& comp : arch.components) {
        CostEntry e;
        e.name = comp.name;
        for (const LayerSpec& l : comp.layers) {
            if (l.kind == LayerSpec::Kind::linear) {
                const std::uint64_t macs = static_cast<std::uint64_t>(l.in) * l.out;
                e.params += macs + l.out;
                e.trainable_params += macs + l.out;
                e.flops += macs;
            } else {
                e.params += 2 * static_cast<std::uint64_t>(l.in);
                e.trainable_params += 2 * static_cast<std::uint64_t>(l.in) * l.classes;
                e.flops += 4 * static_cast<std::uint64_t>(l.in);
            }
        }
        report.total.params += e.params;
        report.total.flops += e.flops;
        report.total.trainable_params += e.trainable_params;
        report.components.push_back(std::move(e));
    }
    return report;
}

}  // namespace c2bn::nn
