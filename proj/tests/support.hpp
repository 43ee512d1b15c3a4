#pragma once

#include "argox/argox.hpp"

#include <Eigen/Dense>

#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace argox::test {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = n(rng);
        }
    }
    return m;
}

/// A A' / k + ridge I with A of shape k x k: symmetric positive definite.
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index k, double ridge = 0.1)
{
    const Eigen::MatrixXd a = random_matrix(rng, k, k);
    Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(k);
    s.diagonal().array() += ridge;
    return s;
}

inline Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, Eigen::Index k)
{
    const Eigen::MatrixXd a = random_matrix(rng, k, k);
    return 0.5 * (a + a.transpose());
}

inline WeeklyPanel make_panel(EpiWeek first, std::vector<std::string> columns, const Eigen::MatrixXd& values)
{
    return WeeklyPanel(week_range(first, first + (values.rows() - 1)), std::move(columns), values);
}

/// Registry of `n` synthetic states S01.. split into `regions` contiguous blocks.
inline GeoRegistry small_registry(int n, int regions, std::set<int> standalone = {})
{
    std::vector<GeoRegistry::Entry> entries;
    for (int i = 0; i < n; ++i) {
        entries.push_back({GeoId{synthetic_geo_name(i)}, GeoId{"R" + std::to_string(1 + i * regions / n)},
                           1e6 * (1 + i), standalone.contains(i)});
    }
    return GeoRegistry(entries);
}

inline std::string slurp(const std::string& file)
{
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace argox::test
