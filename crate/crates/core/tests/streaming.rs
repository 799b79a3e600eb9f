//! A million segments must stream through the record layer without the
//! whole corpus ever being resident. This test lives in its own binary so
//! the process peak-memory reading reflects only this workload.

use snipforge::corpus::{Polarity, Segment};
use snipforge::records::{read_records, write_records};

fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

#[test]
fn million_records_stream_in_constant_memory() {
    const COUNT: usize = 1_000_000;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("segments.ndrec");

    let generator = (0..COUNT).map(|i| {
        Segment::new(
            format!("p{:05}", i % 50_000),
            "battery lasts a long time",
            if i % 2 == 0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            },
        )
        .with_sample_count((i % 100) as u64)
    });
    let written = write_records(&path, generator).unwrap();
    assert_eq!(written, COUNT);

    let mut read = 0usize;
    let mut positive = 0usize;
    for record in read_records::<Segment>(&path).unwrap() {
        let segment = record.unwrap();
        if segment.polarity() == Polarity::Positive {
            positive += 1;
        }
        read += 1;
    }
    assert_eq!(read, COUNT);
    assert_eq!(positive, COUNT / 2);

    // A buffered corpus of a million segments would need hundreds of
    // megabytes; the streaming path stays far below that.
    if let Some(kb) = peak_rss_kb() {
        assert!(kb < 150_000, "peak RSS {kb} kB suggests whole-corpus buffering");
    }
}
