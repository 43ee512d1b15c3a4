#pragma once

#include "argox/epiweek.hpp"

#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace argox {

/// Records, for every fit, the latest week of %ILI and of search data it
/// read. %ILI must stop strictly before the estimation week; search data may
/// reach the estimation week itself.
class LookaheadAudit {
public:
    struct Entry {
        std::string what;
        EpiWeek estimation_week;
        EpiWeek max_ili_week;
        std::optional<EpiWeek> max_feature_week;

        bool ok() const
        {
            return max_ili_week < estimation_week &&
                   (!max_feature_week || *max_feature_week <= estimation_week);
        }
    };

    void record(std::string what, EpiWeek estimation_week, EpiWeek max_ili_week,
                std::optional<EpiWeek> max_feature_week = std::nullopt)
    {
        Entry e{std::move(what), estimation_week, max_ili_week, max_feature_week};
        std::lock_guard lock(mutex_);
        ++count_;
        if (!e.ok()) {
            violations_.push_back(std::move(e));
        }
    }

    std::size_t count() const
    {
        std::lock_guard lock(mutex_);
        return count_;
    }

    std::vector<Entry> violations() const
    {
        std::lock_guard lock(mutex_);
        return violations_;
    }

    bool passed() const
    {
        std::lock_guard lock(mutex_);
        return count_ > 0 && violations_.empty();
    }

private:
    mutable std::mutex mutex_;
    std::size_t count_ = 0;
    std::vector<Entry> violations_;
};

} // namespace argox
