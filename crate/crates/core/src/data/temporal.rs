use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::data::HolidayCalendar;

/// Width of the calendar one-hot: weekday, hour, quarter-hour, holiday.
pub const TE_WIDTH: usize = 7 + 24 + 4 + 1;
const HOUR_OFFSET: usize = 7;
const QUARTER_OFFSET: usize = 31;
const HOLIDAY_OFFSET: usize = 35;

/// Calendar one-hot for a single timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalEncoding {
    pub vector: [f64; TE_WIDTH],
}

impl TemporalEncoding {
    pub fn build(ts: NaiveDateTime, calendar: &HolidayCalendar) -> Self {
        let mut vector = [0.0; TE_WIDTH];
        vector[ts.weekday().num_days_from_monday() as usize] = 1.0;
        vector[HOUR_OFFSET + ts.hour() as usize] = 1.0;
        vector[QUARTER_OFFSET + (ts.minute() / 15) as usize] = 1.0;
        if calendar.contains(ts.date()) {
            vector[HOLIDAY_OFFSET] = 1.0;
        }
        Self { vector }
    }

    pub fn hot_positions(&self) -> Vec<usize> {
        (0..TE_WIDTH).filter(|&i| self.vector[i] == 1.0).collect()
    }

    pub fn is_holiday(&self) -> bool {
        self.vector[HOLIDAY_OFFSET] == 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{NaiveDate, TimeDelta};
    use rand::{Rng, SeedableRng};

    fn at(y: i32, m: u32, d: u32, h: u32, min: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(h, min, 0)
            .unwrap()
    }

    #[test]
    fn monday_midnight() {
        // 2019-03-04 is a Monday
        let te = TemporalEncoding::build(at(2019, 3, 4, 0, 0), &HolidayCalendar::default());
        assert_eq!(te.hot_positions(), vec![0, 7, 31]);
    }

    #[test]
    fn sunday_late_holiday() {
        let day = NaiveDate::from_ymd_opt(2019, 3, 10).unwrap();
        let te = TemporalEncoding::build(at(2019, 3, 10, 23, 45), &HolidayCalendar::new([day]));
        assert_eq!(te.hot_positions(), vec![6, 7 + 23, 31 + 3, 35]);
    }

    #[test]
    fn half_hour_maps_to_third_quarter() {
        let te = TemporalEncoding::build(at(2019, 3, 4, 5, 30), &HolidayCalendar::default());
        assert_eq!(te.vector[31 + 2], 1.0);
    }

    #[test]
    fn block_one_hot_over_random_timestamps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let base = at(2015, 1, 1, 0, 0);
        let cal = HolidayCalendar::new([NaiveDate::from_ymd_opt(2016, 2, 8).unwrap()]);
        for _ in 0..10_000 {
            let ts = base + TimeDelta::minutes(15 * rng.random_range(0..200_000i64));
            let v = TemporalEncoding::build(ts, &cal).vector;
            assert_eq!(v[..7].iter().sum::<f64>(), 1.0);
            assert_eq!(v[7..31].iter().sum::<f64>(), 1.0);
            assert_eq!(v[31..35].iter().sum::<f64>(), 1.0);
            assert!(v[35] == 0.0 || v[35] == 1.0);
            assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
        }
    }
}
