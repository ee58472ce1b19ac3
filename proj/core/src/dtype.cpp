#include "esgforge/dtype.hpp"

#include <cstring>

namespace esgforge {

void widen_to_f32(DType dtype, const std::byte* src, std::size_t count, float* dst) {
    switch (dtype) {
        case DType::F32:
            std::memcpy(dst, src, count * 4);
            break;
        case DType::F16:
            for (std::size_t i = 0; i < count; ++i) {
                std::uint16_t h;
                std::memcpy(&h, src + 2 * i, 2);
                dst[i] = f16_to_f32(h);
            }
            break;
        case DType::BF16:
            for (std::size_t i = 0; i < count; ++i) {
                std::uint16_t h;
                std::memcpy(&h, src + 2 * i, 2);
                dst[i] = bf16_to_f32(h);
            }
            break;
    }
}

void narrow_from_f32(DType dtype, const float* src, std::size_t count, std::byte* dst) {
    switch (dtype) {
        case DType::F32:
            std::memcpy(dst, src, count * 4);
            break;
        case DType::F16:
            for (std::size_t i = 0; i < count; ++i) {
                const std::uint16_t h = f32_to_f16(src[i]);
                std::memcpy(dst + 2 * i, &h, 2);
            }
            break;
        case DType::BF16:
            for (std::size_t i = 0; i < count; ++i) {
                const std::uint16_t h = f32_to_bf16(src[i]);
                std::memcpy(dst + 2 * i, &h, 2);
            }
            break;
    }
}

}  // namespace esgforge
