//! Calendar granularities and the French public-holiday calendar.
//!
//! Movable feasts are derived from the Gregorian computus, so the holiday
//! table is valid for any Gregorian year rather than a hardcoded list.

use chrono::{Datelike, Duration, NaiveDate, Weekday};

/// Calendar granularities extracted from one date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarFeatures {
    /// Monday = 1 .. Sunday = 7.
    pub day_in_week: u32,
    pub day_in_month: u32,
    pub day_in_year: u32,
    /// ceil(day_in_month / 7), values 1..=5.
    pub week_in_month: u32,
    /// ISO-8601 week number, 1..=53.
    pub week_in_year: u32,
    pub month_in_year: u32,
    /// 1 on weekdays that are not French public holidays, else 0.
    pub business_day: u8,
}

/// Extracts every calendar granularity for a date.
pub fn extract_calendar(date: NaiveDate) -> CalendarFeatures {
    let day_in_week = date.weekday().number_from_monday();
    let day_in_month = date.day();
    CalendarFeatures {
        day_in_week,
        day_in_month,
        day_in_year: date.ordinal(),
        week_in_month: (day_in_month + 6) / 7,
        week_in_year: date.iso_week().week(),
        month_in_year: date.month(),
        business_day: if is_business_day(date) { 1 } else { 0 },
    }
}

/// Weekday that is not a French public holiday.
pub fn is_business_day(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !is_french_holiday(date)
}

/// Gregorian Easter Sunday (anonymous/Meeus computus).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = ((h + l - 7 * m + 114) % 31) + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("computus in range")
}

/// The 11 French public holidays of a year: 8 fixed dates plus Easter Monday,
/// Ascension (Easter + 39) and Whit Monday (Easter + 50).
pub fn french_holidays(year: i32) -> Vec<NaiveDate> {
    let fixed = [
        (1, 1),   // Jour de l'an
        (5, 1),   // Fete du Travail
        (5, 8),   // Victoire 1945
        (7, 14),  // Fete nationale
        (8, 15),  // Assomption
        (11, 1),  // Toussaint
        (11, 11), // Armistice 1918
        (12, 25), // Noel
    ];
    let easter = easter_sunday(year);
    let mut days: Vec<NaiveDate> = fixed
        .iter()
        .map(|&(m, d)| NaiveDate::from_ymd_opt(year, m, d).unwrap())
        .collect();
    days.push(easter + Duration::days(1)); // Lundi de Paques
    days.push(easter + Duration::days(39)); // Ascension
    days.push(easter + Duration::days(50)); // Lundi de Pentecote
    days.sort();
    days
}

/// True when the date is one of the 11 French public holidays.
pub fn is_french_holiday(date: NaiveDate) -> bool {
    french_holidays(date.year()).contains(&date)
}
