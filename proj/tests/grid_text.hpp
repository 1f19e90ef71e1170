#pragma once

// Builds masks from rows of text: '#' or '1' is foreground, anything else background.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <initializer_list>
#include <string>
#include <vector>

#include "fissure/dataset.hpp"
#include "fissure/raster.hpp"
#include "fissure/skeleton.hpp"

namespace testutil {

inline fissure::BinaryMask mask_from(std::initializer_list<std::string> rows) {
    const std::vector<std::string> r(rows);
    fissure::BinaryMask m(static_cast<int>(r.front().size()), static_cast<int>(r.size()));
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) m(x, y) = (r[y][x] == '#' || r[y][x] == '1') ? 1 : 0;
    return m;
}

inline fissure::Skeleton skel_from(std::initializer_list<std::string> rows) {
    fissure::BinaryMask m = mask_from(rows);
    const bool thin = fissure::is_one_pixel_wide(m);
    return fissure::Skeleton{std::move(m), thin};
}

inline fissure::BinaryMask rect(int w, int h, int x0, int y0, int rw, int rh) {
    fissure::BinaryMask m(w, h);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) m(x, y) = 1;
    return m;
}

/// Thin skeleton of a plus with arms of `arm` steps centred on (c, c).
inline fissure::Skeleton plus_skeleton(int size, int c, int arm) {
    fissure::BinaryMask m(size, size);
    for (int d = -arm; d <= arm; ++d) {
        m(c + d, c) = 1;
        m(c, c + d) = 1;
    }
    return fissure::Skeleton{std::move(m), true};
}

/// Random blob mask: a union of discs and rectangles plus salt noise.
inline fissure::BinaryMask random_blobs(fissure::Rng& rng, int w, int h) {
    fissure::BinaryMask m(w, h);
    const int shapes = rng.uniform_int(1, 6);
    for (int s = 0; s < shapes; ++s) {
        const int x0 = rng.uniform_int(0, w - 1), y0 = rng.uniform_int(0, h - 1);
        const int r = rng.uniform_int(1, std::max(2, w / 6));
        const bool disc = rng.uniform_int(0, 1) == 0;
        for (int y = std::max(0, y0 - r); y <= std::min(h - 1, y0 + r); ++y)
            for (int x = std::max(0, x0 - r); x <= std::min(w - 1, x0 + r); ++x)
                if (!disc || (x - x0) * (x - x0) + (y - y0) * (y - y0) <= r * r) m(x, y) = 1;
    }
    for (auto& v : m.data())
        if (rng.uniform() < 0.03) v = 1;
    return m;
}

/// Fresh empty scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("fissure_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Every regular file under root, keyed by relative path, with its bytes.
inline std::map<std::string, std::string> tree_snapshot(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[std::filesystem::relative(e.path(), root).generic_string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

}  // namespace testutil
