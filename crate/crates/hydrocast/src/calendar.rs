//! Calendar helpers for day-of-year indexed statistics.
//!
//! Seasonal statistics are stored in 366-slot tables indexed by day of year.
//! So that the same calendar day lands in the same slot every year, slots
//! 1..=365 follow the common-year ordinal (Mar 1 is always 60, Dec 31 is
//! always 365) and Feb 29 is given the dedicated overflow slot 366. Feb 29
//! occurs in at most one year out of four, which is why slot 366 is sparse
//! and gets special fallback treatment when fitting statistics.

use chrono::{Datelike, NaiveDate};

/// Number of day-of-year slots (366; slot 366 is Feb 29).
pub const DOY_SLOTS: usize = 366;

/// Slot assigned to Feb 29.
pub const FEB29_SLOT: u16 = 366;

/// Fallback slot used for Feb 29 statistics when too few leap days were
/// observed (the common-year slot for Mar 1).
pub const FEB29_FALLBACK_SLOT: u16 = 60;

/// Day-of-year slot in 1..=366 for a date.
///
/// Feb 29 maps to 366; every other day maps to its common-year ordinal, so
/// a given month/day pair has the same slot in every year.
pub fn day_of_year(date: NaiveDate) -> u16 {
    let ord = date.ordinal() as u16;
    if date.leap_year() {
        if date.month() == 2 && date.day() == 29 {
            FEB29_SLOT
        } else if ord > 60 {
            ord - 1
        } else {
            ord
        }
    } else {
        ord
    }
}

/// Day-of-year slot rescaled to [0, 1), used as the synthetic date predictor.
pub fn date_fraction(date: NaiveDate) -> f64 {
    f64::from(day_of_year(date) - 1) / DOY_SLOTS as f64
}

/// Number of whole days from `start` to `date` (negative if `date` is earlier).
pub fn days_between(start: NaiveDate, date: NaiveDate) -> i64 {
    date.signed_duration_since(start).num_days()
}

/// The date `offset` days after `start`.
pub fn date_plus_days(start: NaiveDate, offset: usize) -> NaiveDate {
    start + chrono::Duration::days(offset as i64)
}
