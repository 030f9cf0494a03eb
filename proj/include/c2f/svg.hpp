#pragma once

// Minimal SVG charts for training curves and embeddings.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace c2f {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const Series> series);

// Scatter of n points with `dims` coordinates (2, or 3 drawn in oblique projection),
// coloured by class label.
std::string scatter_chart(const std::string& title, std::span<const double> points, std::size_t dims,
                          std::span<const int> labels, std::span<const std::string> class_names);

}  // namespace c2f
