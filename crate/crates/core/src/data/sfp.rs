use std::collections::BTreeMap;

use chrono::{DateTime, Days, FixedOffset, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{DailyActivityMatrix, NodeSet, PhysChannel, PhysReading, PhysVector, SensorEvent};
use crate::error::{Error, Result};

/// Column layout and civil-time convention of a corpus.
///
/// Days are cut in one fixed local offset per corpus; no daylight-saving shifts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfpLayout {
    pub nodes: NodeSet,
    #[serde(default)]
    pub utc_offset_minutes: i32,
}

impl SfpLayout {
    pub fn new(nodes: NodeSet) -> Self {
        SfpLayout {
            nodes,
            utc_offset_minutes: 0,
        }
    }

    fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).unwrap_or(FixedOffset::east_opt(0).unwrap())
    }

    /// Local (date, hour) of an instant.
    pub fn local_slot(&self, ts: DateTime<Utc>) -> (NaiveDate, usize) {
        let local = ts.with_timezone(&self.offset());
        (local.date_naive(), local.hour() as usize)
    }
}

fn check_single_home(events: &[SensorEvent]) -> Result<Option<&str>> {
    let Some(first) = events.first() else {
        return Ok(None);
    };
    if let Some(other) = events.iter().find(|e| e.home_id != first.home_id) {
        return Err(Error::MixedHomes {
            first: first.home_id.clone(),
            other: other.home_id.clone(),
        });
    }
    Ok(Some(&first.home_id))
}

/// Aggregates one home's events into the hourly count grid of `date`.
///
/// Events falling on other days are ignored. An empty event list yields a zero
/// matrix with an empty home id.
pub fn build_sfp(
    events: &[SensorEvent],
    date: NaiveDate,
    layout: &SfpLayout,
) -> Result<DailyActivityMatrix> {
    let home = check_single_home(events)?.unwrap_or_default().to_string();
    let mut matrix = DailyActivityMatrix::zeros(home, date, layout.nodes.len());
    for e in events {
        let col = layout
            .nodes
            .index_of(e.node)
            .ok_or_else(|| Error::UnknownNode(e.node.name().to_string()))?;
        let (day, hour) = layout.local_slot(e.timestamp);
        if day == date {
            matrix.add(hour, col, e.value);
        }
    }
    Ok(matrix)
}

/// Builds one matrix per local day touched by the events, sorted by date.
pub fn build_days(events: &[SensorEvent], layout: &SfpLayout) -> Result<Vec<DailyActivityMatrix>> {
    check_single_home(events)?;
    let mut by_day: BTreeMap<NaiveDate, Vec<SensorEvent>> = BTreeMap::new();
    for e in events {
        by_day
            .entry(layout.local_slot(e.timestamp).0)
            .or_default()
            .push(e.clone());
    }
    by_day
        .into_iter()
        .map(|(date, evs)| build_sfp(&evs, date, layout))
        .collect()
}

/// The diagnosis day followed by the three days after it.
pub fn label_uti_window(diagnosis_date: NaiveDate) -> [NaiveDate; 4] {
    std::array::from_fn(|i| diagnosis_date + Days::new(i as u64))
}

/// Daily mean of the observed readings per channel; channels without a reading
/// on `date` are marked unobserved.
pub fn aggregate_phys(
    readings: &[PhysReading],
    date: NaiveDate,
    channels: &[PhysChannel],
    layout: &SfpLayout,
) -> PhysVector {
    let mut out = PhysVector::unobserved(channels);
    for (i, &ch) in channels.iter().enumerate() {
        let (sum, n) = readings
            .iter()
            .filter(|r| r.observed && r.channel == ch && layout.local_slot(r.timestamp).0 == date)
            .fold((0.0, 0usize), |(s, n), r| (s + r.value, n + 1));
        if n > 0 {
            out.values[i] = sum / n as f64;
            out.observed[i] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use chrono::TimeZone;

    use super::*;
    use crate::data::Node;

    fn ev(node: Node, y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> SensorEvent {
        SensorEvent {
            home_id: "h1".into(),
            node,
            timestamp: Utc.with_ymd_and_hms(y, mo, d, h, mi, s).unwrap(),
            value: 1,
        }
    }

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn counts_three_bathroom_events_in_hour_ten() {
        let layout = SfpLayout::default();
        let events = [
            ev(Node::BathroomDoor, 2019, 3, 1, 10, 5, 0),
            ev(Node::BathroomDoor, 2019, 3, 1, 10, 30, 0),
            ev(Node::BathroomDoor, 2019, 3, 1, 10, 59, 0),
        ];
        let m = build_sfp(&events, day(2019, 3, 1), &layout).unwrap();
        let bath = layout.nodes.index_of(Node::BathroomDoor).unwrap();
        assert_eq!(m.get(10, bath), 3);
        assert_eq!(m.total(), 3);
    }

    #[test]
    fn empty_events_give_zero_matrix() {
        let m = build_sfp(&[], day(2019, 3, 1), &SfpLayout::default()).unwrap();
        assert_eq!(m.grid().len(), 24 * 8);
        assert_eq!(m.total(), 0);
    }

    #[test]
    fn hour_boundaries_are_half_open() {
        // Oracle: an instant t belongs to hour h of date D iff D+h:00 <= t < D+(h+1):00.
        let layout = SfpLayout::default();
        let date = day(2019, 3, 1);
        let probes = [
            ev(Node::HallwayPir, 2019, 3, 1, 23, 59, 59),
            ev(Node::HallwayPir, 2019, 3, 2, 0, 0, 0),
            ev(Node::HallwayPir, 2019, 3, 1, 0, 0, 0),
            ev(Node::HallwayPir, 2019, 2, 28, 23, 59, 59),
            ev(Node::HallwayPir, 2019, 3, 1, 11, 0, 0),
        ];
        let m = build_sfp(&probes, date, &layout).unwrap();
        let start = Utc.with_ymd_and_hms(2019, 3, 1, 0, 0, 0).unwrap();
        let mut expected = [0u32; 24];
        for p in &probes {
            for (h, slot) in expected.iter_mut().enumerate() {
                let lo = start + chrono::Duration::hours(h as i64);
                let hi = lo + chrono::Duration::hours(1);
                if p.timestamp >= lo && p.timestamp < hi {
                    *slot += 1;
                }
            }
        }
        let col: Vec<u32> = m.column(0).collect();
        assert_eq!(col, expected);
        assert_eq!(m.get(23, 0), 1);
        assert_eq!(m.get(0, 0), 1);
        assert_eq!(m.get(11, 0), 1);
        assert_eq!(m.total(), 3);
    }

    #[test]
    fn rejects_mixed_homes_and_unknown_nodes() {
        let mut a = ev(Node::HallwayPir, 2019, 3, 1, 1, 0, 0);
        let mut b = a.clone();
        b.home_id = "h2".into();
        assert!(matches!(
            build_sfp(&[a.clone(), b], day(2019, 3, 1), &SfpLayout::default()),
            Err(Error::MixedHomes { .. })
        ));
        let layout = SfpLayout::new(NodeSet::new(vec![Node::BathroomDoor]).unwrap());
        a.node = Node::HallwayPir;
        assert!(matches!(
            build_sfp(&[a], day(2019, 3, 1), &layout),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn local_offset_shifts_day_boundary() {
        let layout = SfpLayout {
            nodes: NodeSet::default(),
            utc_offset_minutes: 60,
        };
        // 23:30 UTC is 00:30 the next local day.
        let e = ev(Node::HallwayPir, 2019, 3, 1, 23, 30, 0);
        let m = build_sfp(std::slice::from_ref(&e), day(2019, 3, 2), &layout).unwrap();
        assert_eq!(m.get(0, 0), 1);
        let m = build_sfp(&[e], day(2019, 3, 1), &layout).unwrap();
        assert_eq!(m.total(), 0);
    }

    #[test]
    fn uti_window_examples() {
        assert_eq!(
            label_uti_window(day(2019, 3, 1)),
            [day(2019, 3, 1), day(2019, 3, 2), day(2019, 3, 3), day(2019, 3, 4)]
        );
        assert_eq!(
            label_uti_window(day(2019, 3, 30)),
            [day(2019, 3, 30), day(2019, 3, 31), day(2019, 4, 1), day(2019, 4, 2)]
        );
        // Leap-year oracle: 2020 is divisible by 4 and not by 100, so February has 29 days.
        let leap = label_uti_window(day(2020, 2, 28));
        assert_eq!(leap, [day(2020, 2, 28), day(2020, 2, 29), day(2020, 3, 1), day(2020, 3, 2)]);
    }

    #[test]
    fn phys_mean_of_observed_readings() {
        let layout = SfpLayout::default();
        let mk = |v: f64, h: u32, observed: bool| PhysReading {
            home_id: "h1".into(),
            channel: PhysChannel::Temperature,
            timestamp: Utc.with_ymd_and_hms(2019, 3, 1, h, 0, 0).unwrap(),
            value: v,
            observed,
        };
        let readings = [mk(36.0, 8, true), mk(37.0, 20, true), mk(40.0, 21, false)];
        let p = aggregate_phys(&readings, day(2019, 3, 1), &PhysChannel::default_set(), &layout);
        assert_eq!(p.get(PhysChannel::Temperature), Some(36.5));
        assert_eq!(p.get(PhysChannel::Pulse), None);
    }

    #[test]
    fn build_days_groups_by_local_date() {
        let events = [
            ev(Node::HallwayPir, 2019, 3, 1, 1, 0, 0),
            ev(Node::HallwayPir, 2019, 3, 2, 1, 0, 0),
            ev(Node::HallwayPir, 2019, 3, 2, 2, 0, 0),
        ];
        let days = build_days(&events, &SfpLayout::default()).unwrap();
        assert_eq!(days.len(), 2);
        assert_eq!(days[1].total(), 2);
    }
}
