//! Delimited-text export of frames.

use std::io::Write;

use super::{Frame, Scene};

pub fn frame_csv_header() -> [&'static str; 7] {
    ["time", "x", "y", "L", "a", "b", "odor"]
}

/// `time,aggregate_odor` followed by one column per hinge.
pub fn series_csv_header(scene: &Scene) -> Vec<String> {
    let mut h = vec!["time".to_string(), "aggregate_odor".to_string()];
    h.extend(scene.hinges().iter().map(|h| format!("angle_{}", h.name)));
    h
}

fn time_field(t: f64) -> String {
    format!("{t:.6}")
}

/// One row per cell.
pub fn write_frame_rows<W: Write>(w: &mut csv::Writer<W>, frame: &Frame) -> csv::Result<()> {
    let t = time_field(frame.time);
    for (i, (lab, odor)) in frame.color_grid.iter().zip(&frame.odor_field).enumerate() {
        w.write_record([
            t.clone(),
            (i % frame.width).to_string(),
            (i / frame.width).to_string(),
            lab.l.to_string(),
            lab.a.to_string(),
            lab.b.to_string(),
            odor.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_series_row<W: Write>(w: &mut csv::Writer<W>, frame: &Frame) -> csv::Result<()> {
    let mut row = vec![time_field(frame.time), frame.aggregate_odor.to_string()];
    row.extend(frame.angle_list.iter().map(f64::to_string));
    w.write_record(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Lab;

    #[test]
    fn rows_are_row_major() {
        let f = Frame {
            time: 0.1,
            width: 2,
            height: 1,
            color_grid: vec![Lab::new(1.0, 2.0, 3.0), Lab::new(4.0, 5.0, 6.0)],
            angle_list: vec![],
            odor_field: vec![0.0, 0.5],
            aggregate_odor: 0.5,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        write_frame_rows(&mut w, &f).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text, "0.100000,0,0,1,2,3,0\n0.100000,1,0,4,5,6,0.5\n");
    }
}
