#pragma once

// MMWR epidemiological weeks. Weeks run Sunday..Saturday; week 1 of a year is
// the week containing January 4th, so a year has 52 or 53 weeks.

#include "argox/error.hpp"

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>

namespace argox {

struct EpiWeek {
    int year = 0;
    int week = 0;

    auto operator<=>(const EpiWeek&) const = default;

    /// First day (Sunday) of MMWR week 1 of `year`.
    static std::chrono::sys_days year_start(int year)
    {
        using namespace std::chrono;
        const sys_days jan4 = std::chrono::year{year} / January / 4;
        return jan4 - (weekday{jan4} - Sunday);
    }

    static int weeks_in_year(int year)
    {
        return static_cast<int>((year_start(year + 1) - year_start(year)).count() / 7);
    }

    static EpiWeek checked(int year, int week)
    {
        if (week < 1 || week > weeks_in_year(year)) {
            throw DataError("invalid epidemiological week " + std::to_string(year) + "w" +
                            std::to_string(week));
        }
        return EpiWeek{year, week};
    }

    std::chrono::sys_days start() const
    {
        return year_start(year) + std::chrono::days{7 * (week - 1)};
    }

    /// Saturday closing the week; CDC reports are labelled by this date.
    std::chrono::sys_days end() const { return start() + std::chrono::days{6}; }

    static EpiWeek containing(std::chrono::sys_days day)
    {
        using namespace std::chrono;
        int y = static_cast<int>(year_month_day{day}.year());
        if (day < year_start(y)) {
            --y;
        } else if (day >= year_start(y + 1)) {
            ++y;
        }
        return EpiWeek{y, static_cast<int>((day - year_start(y)).count() / 7) + 1};
    }

    /// Weeks since Sunday 1970-01-04; differences are week counts.
    long ordinal() const
    {
        return static_cast<long>(start().time_since_epoch().count() - 3) / 7;
    }

    EpiWeek operator+(long n) const { return containing(start() + std::chrono::days{7 * n}); }
    EpiWeek operator-(long n) const { return *this + (-n); }
    long operator-(const EpiWeek& other) const { return ordinal() - other.ordinal(); }

    EpiWeek next() const { return *this + 1; }
    EpiWeek prev() const { return *this - 1; }

    /// "2014w41"
    std::string str() const
    {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%dw%02d", year, week);
        return buf;
    }

    /// Accepts "2014w41", "2014W41" or "2014-41".
    static EpiWeek parse(const std::string& text)
    {
        int y = 0;
        int w = 0;
        char sep = 0;
        if (std::sscanf(text.c_str(), "%d%c%d", &y, &sep, &w) != 3 ||
            (sep != 'w' && sep != 'W' && sep != '-')) {
            throw DataError("cannot parse epidemiological week '" + text + "'");
        }
        return checked(y, w);
    }
};

} // namespace argox
