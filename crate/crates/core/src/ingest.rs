//! Detection ingestion: the boundary between an external face/eye detector and
//! the engine.
//!
//! Three inputs are understood here:
//!
//! * the detection log, one frame per line:
//!   `{"t":<ms>,"d":[[<label>,[x_min,y_min,x_max,y_max],<confidence>],...]}`
//! * per-image XML annotations in the `object/name/bndbox` layout
//! * participant folder codes such as `FBNg21`

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The six object classes a detector reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectionLabel {
    Face,
    OpenedEye,
    ClosedEye,
    Mouth,
    Yawn,
    Eyebrow,
}

impl DetectionLabel {
    pub const ALL: [DetectionLabel; 6] = [
        DetectionLabel::Face,
        DetectionLabel::OpenedEye,
        DetectionLabel::ClosedEye,
        DetectionLabel::Mouth,
        DetectionLabel::Yawn,
        DetectionLabel::Eyebrow,
    ];

    /// Canonical wire name.
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionLabel::Face => "face",
            DetectionLabel::OpenedEye => "opened_eye",
            DetectionLabel::ClosedEye => "closed_eye",
            DetectionLabel::Mouth => "mouth",
            DetectionLabel::Yawn => "yawn",
            DetectionLabel::Eyebrow => "eyebrow",
        }
    }
}

impl fmt::Display for DetectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectionLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Axis-aligned box in pixel coordinates. Always non-degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    x_min: u32,
    y_min: u32,
    x_max: u32,
    y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::DegenerateBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> u32 {
        self.x_min
    }
    pub fn y_min(&self) -> u32 {
        self.y_min
    }
    pub fn x_max(&self) -> u32 {
        self.x_max
    }
    pub fn y_max(&self) -> u32 {
        self.y_max
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// One labeled box with detector confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub label: DetectionLabel,
    pub bbox: BoundingBox,
    confidence: f64,
}

impl Detection {
    pub fn new(label: DetectionLabel, bbox: BoundingBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Config(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            label,
            bbox,
            confidence,
        })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

/// All detections of one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetection {
    pub timestamp_ms: u64,
    pub detections: Vec<Detection>,
}

impl FrameDetection {
    pub fn new(timestamp_ms: u64, detections: Vec<Detection>) -> Self {
        Self {
            timestamp_ms,
            detections,
        }
    }

    pub fn has(&self, label: DetectionLabel) -> bool {
        self.detections.iter().any(|d| d.label == label)
    }

    pub fn count(&self, label: DetectionLabel) -> usize {
        self.detections.iter().filter(|d| d.label == label).count()
    }

    /// Serializes the frame as one detection-log line (no trailing newline).
    pub fn to_log_line(&self) -> String {
        let record = LogRecordRef {
            t: self.timestamp_ms,
            d: self
                .detections
                .iter()
                .map(|d| (d.label.as_str(), d.bbox.as_array(), d.confidence))
                .collect(),
        };
        serde_json::to_string(&record).expect("log record serialization is infallible")
    }
}

#[derive(Serialize)]
struct LogRecordRef<'a> {
    t: u64,
    d: Vec<(&'a str, [u32; 4], f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogRecord {
    t: u64,
    d: Vec<(String, [u32; 4], f64)>,
}

fn parse_log_line(line: &str, line_no: usize) -> Result<FrameDetection> {
    let record_err = |msg: String| Error::Record { line: line_no, msg };
    let raw: LogRecord = serde_json::from_str(line).map_err(|e| record_err(e.to_string()))?;
    let detections = raw
        .d
        .into_iter()
        .map(|(label, [x0, y0, x1, y1], conf)| {
            let label: DetectionLabel = label
                .parse()
                .map_err(|e: Error| record_err(e.to_string()))?;
            let bbox = BoundingBox::new(x0, y0, x1, y1).map_err(|e| record_err(e.to_string()))?;
            Detection::new(label, bbox, conf).map_err(|e| record_err(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameDetection::new(raw.t, detections))
}

/// Streaming reader over a detection log.
///
/// Blank lines are skipped. Iteration stops after the first error.
pub struct DetectionLogReader<R> {
    reader: R,
    line_no: usize,
    last_t: Option<u64>,
    buf: String,
    failed: bool,
}

/// Wraps `source` in a [`DetectionLogReader`].
pub fn parse_detection_log<R: BufRead>(source: R) -> DetectionLogReader<R> {
    DetectionLogReader {
        reader: source,
        line_no: 0,
        last_t: None,
        buf: String::new(),
        failed: false,
    }
}

/// Reads a whole detection log into memory.
pub fn read_detection_log<R: BufRead>(source: R) -> Result<Vec<FrameDetection>> {
    parse_detection_log(source).collect()
}

impl<R: BufRead> Iterator for DetectionLogReader<R> {
    type Item = Result<FrameDetection>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            self.line_no += 1;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let frame = match parse_log_line(line, self.line_no) {
                Ok(f) => f,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            if let Some(prev) = self.last_t {
                if frame.timestamp_ms <= prev {
                    self.failed = true;
                    return Some(Err(Error::Stream {
                        line: self.line_no,
                        msg: format!(
                            "timestamp {} does not increase past {prev}",
                            frame.timestamp_ms
                        ),
                    }));
                }
            }
            self.last_t = Some(frame.timestamp_ms);
            return Some(Ok(frame));
        }
    }
}

/// Parses an image annotation file into its labeled boxes, in file order.
pub fn parse_annotation_xml(contents: &str) -> Result<Vec<(DetectionLabel, BoundingBox)>> {
    let doc = roxmltree::Document::parse(contents).map_err(|e| Error::Annotation(e.to_string()))?;
    doc.descendants()
        .filter(|n| n.has_tag_name("object"))
        .map(|obj| {
            let name = child_text(obj, "name")?;
            let label: DetectionLabel = name.parse()?;
            let bndbox = obj
                .children()
                .find(|n| n.has_tag_name("bndbox"))
                .ok_or_else(|| Error::Annotation(format!("object `{name}` has no <bndbox>")))?;
            let coord = |tag: &str| -> Result<u32> {
                let text = child_text(bndbox, tag)?;
                parse_coordinate(text)
                    .ok_or_else(|| Error::Annotation(format!("bad <{tag}> value `{text}`")))
            };
            let bbox = BoundingBox::new(
                coord("xmin")?,
                coord("ymin")?,
                coord("xmax")?,
                coord("ymax")?,
            )?;
            Ok((label, bbox))
        })
        .collect()
}

fn child_text<'a>(node: roxmltree::Node<'a, '_>, tag: &str) -> Result<&'a str> {
    node.children()
        .find(|n| n.has_tag_name(tag))
        .and_then(|n| n.text())
        .map(str::trim)
        .ok_or_else(|| Error::Annotation(format!("missing <{tag}>")))
}

// Labeling tools sometimes write integral coordinates as "12.0".
fn parse_coordinate(text: &str) -> Option<u32> {
    if let Ok(v) = text.parse::<u32>() {
        return Some(v);
    }
    let v: f64 = text.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u32)
}

/// Writes boxes in the annotation layout understood by [`parse_annotation_xml`].
pub fn format_annotation_xml(filename: &str, objects: &[(DetectionLabel, BoundingBox)]) -> String {
    let mut out = String::from("<annotation>\n");
    out.push_str(&format!("  <filename>{filename}</filename>\n"));
    for (label, b) in objects {
        out.push_str(&format!(
            "  <object>\n    <name>{label}</name>\n    <bndbox>\n      <xmin>{}</xmin>\n      <ymin>{}</ymin>\n      <xmax>{}</xmax>\n      <ymax>{}</ymax>\n    </bndbox>\n  </object>\n",
            b.x_min, b.y_min, b.x_max, b.y_max
        ));
    }
    out.push_str("</annotation>\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lighting {
    Bright,
    Dark,
}

/// Dataset folder code: gender, lighting, glasses, participant index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticipantCode {
    pub gender: Gender,
    pub light: Lighting,
    pub glasses: bool,
    pub index: u32,
}

/// Parses codes of the form `[FM](B|D)(G|Ng)<index>`.
///
/// The index must be a positive decimal without leading zeros, so that every
/// accepted code formats back to the identical string.
pub fn parse_participant_code(code: &str) -> Result<ParticipantCode> {
    let err = || Error::ParticipantCode(code.to_string());
    let mut rest = code;
    let mut take = |prefix: &str| -> bool {
        match rest.strip_prefix(prefix) {
            Some(r) => {
                rest = r;
                true
            }
            None => false,
        }
    };
    let gender = if take("F") {
        Gender::Female
    } else if take("M") {
        Gender::Male
    } else {
        return Err(err());
    };
    let light = if take("B") {
        Lighting::Bright
    } else if take("D") {
        Lighting::Dark
    } else {
        return Err(err());
    };
    let glasses = if take("Ng") {
        false
    } else if take("G") {
        true
    } else {
        return Err(err());
    };
    if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let index = rest.parse().map_err(|_| err())?;
    Ok(ParticipantCode {
        gender,
        light,
        glasses,
        index,
    })
}

impl FromStr for ParticipantCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_participant_code(s)
    }
}

impl fmt::Display for ParticipantCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = match self.gender {
            Gender::Female => "F",
            Gender::Male => "M",
        };
        let l = match self.light {
            Lighting::Bright => "B",
            Lighting::Dark => "D",
        };
        let gl = if self.glasses { "G" } else { "Ng" };
        write!(f, "{g}{l}{gl}{}", self.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_closed_eye_line() {
        let log = r#"{"t":100,"d":[["closed_eye",[10,10,40,30],0.95]]}"#;
        let frames = read_detection_log(log.as_bytes()).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].timestamp_ms, 100);
        assert_eq!(frames[0].detections.len(), 1);
        let d = frames[0].detections[0];
        assert_eq!(d.label, DetectionLabel::ClosedEye);
        assert_eq!(d.bbox.as_array(), [10, 10, 40, 30]);
        assert_eq!(d.confidence(), 0.95);
    }

    #[test]
    fn empty_stream() {
        assert!(read_detection_log(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn non_monotonic_timestamp_is_stream_error() {
        let log = "{\"t\":200,\"d\":[]}\n{\"t\":150,\"d\":[]}\n";
        let mut it = parse_detection_log(log.as_bytes());
        assert!(it.next().unwrap().is_ok());
        match it.next().unwrap() {
            Err(Error::Stream { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected stream error, got {other:?}"),
        }
        assert!(it.next().is_none());
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let cases = [
            r#"{"t":1,"d":[["nose",[0,0,1,1],0.5]]}"#,
            r#"{"t":1,"d":[["face",[5,0,5,1],0.5]]}"#,
            r#"{"t":1,"d":[["face",[0,0,1,1],1.5]]}"#,
            r#"{"t":1,"d":[["face",[0,0,1,1],-0.1]]}"#,
            r#"{"t":1,"d":[["face",[-1,0,1,1],0.5]]}"#,
            r#"{"t":1}"#,
            "not json",
        ];
        for case in cases {
            let log = format!("{{\"t\":0,\"d\":[]}}\n\n{case}\n");
            let err = read_detection_log(log.as_bytes()).unwrap_err();
            assert!(
                matches!(err, Error::Record { line: 3, .. }),
                "{case}: {err:?}"
            );
        }
    }

    #[test]
    fn log_line_round_trip() {
        let frame = FrameDetection::new(
            1234,
            vec![
                Detection::new(
                    DetectionLabel::Face,
                    BoundingBox::new(1, 2, 300, 400).unwrap(),
                    0.99,
                )
                .unwrap(),
                Detection::new(
                    DetectionLabel::Yawn,
                    BoundingBox::new(10, 20, 30, 40).unwrap(),
                    0.731,
                )
                .unwrap(),
            ],
        );
        let line = frame.to_log_line();
        assert_eq!(
            line,
            r#"{"t":1234,"d":[["face",[1,2,300,400],0.99],["yawn",[10,20,30,40],0.731]]}"#
        );
        assert_eq!(read_detection_log(line.as_bytes()).unwrap(), vec![frame]);
    }

    const ONE_YAWN: &str = r#"<annotation>
  <folder>FBNg21</folder>
  <filename>img_0001.jpg</filename>
  <size><width>640</width><height>480</height><depth>3</depth></size>
  <object>
    <name>yawn</name>
    <pose>Unspecified</pose>
    <bndbox><xmin>250</xmin><ymin>300</ymin><xmax>330</xmax><ymax>380</ymax></bndbox>
  </object>
</annotation>"#;

    #[test]
    fn annotation_single_object() {
        let objs = parse_annotation_xml(ONE_YAWN).unwrap();
        assert_eq!(
            objs,
            vec![(
                DetectionLabel::Yawn,
                BoundingBox::new(250, 300, 330, 380).unwrap()
            )]
        );
    }

    #[test]
    fn annotation_six_labels_in_order() {
        let objects: Vec<_> = DetectionLabel::ALL
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let i = i as u32;
                (
                    l,
                    BoundingBox::new(10 * i, 5 * i, 10 * i + 40, 5 * i + 30).unwrap(),
                )
            })
            .collect();
        let xml = format_annotation_xml("img.jpg", &objects);
        let parsed = parse_annotation_xml(&xml).unwrap();
        assert_eq!(parsed.len(), 6);
        assert_eq!(parsed, objects);
        let mut labels: Vec<_> = parsed.iter().map(|(l, _)| *l).collect();
        labels.dedup();
        assert_eq!(labels.len(), 6);
    }

    #[test]
    fn annotation_errors() {
        let nose = ONE_YAWN.replace("<name>yawn</name>", "<name>nose</name>");
        assert!(matches!(parse_annotation_xml(&nose), Err(Error::UnknownLabel(s)) if s == "nose"));

        let flat = ONE_YAWN.replace("<ymax>380</ymax>", "<ymax>300</ymax>");
        assert!(matches!(
            parse_annotation_xml(&flat),
            Err(Error::DegenerateBox { .. })
        ));

        let broken = ONE_YAWN.replace("</annotation>", "");
        assert!(matches!(
            parse_annotation_xml(&broken),
            Err(Error::Annotation(_))
        ));

        let missing = ONE_YAWN.replace("<xmin>250</xmin>", "");
        assert!(matches!(
            parse_annotation_xml(&missing),
            Err(Error::Annotation(_))
        ));
    }

    #[test]
    fn annotation_accepts_integral_float_coordinates() {
        let xml = ONE_YAWN.replace("<xmin>250</xmin>", "<xmin>250.0</xmin>");
        assert_eq!(parse_annotation_xml(&xml).unwrap()[0].1.x_min(), 250);
        let xml = ONE_YAWN.replace("<xmin>250</xmin>", "<xmin>250.5</xmin>");
        assert!(parse_annotation_xml(&xml).is_err());
    }

    #[test]
    fn participant_codes() {
        let c = parse_participant_code("FBNg21").unwrap();
        assert_eq!(
            c,
            ParticipantCode {
                gender: Gender::Female,
                light: Lighting::Bright,
                glasses: false,
                index: 21
            }
        );
        let c = parse_participant_code("MDG3").unwrap();
        assert_eq!(
            c,
            ParticipantCode {
                gender: Gender::Male,
                light: Lighting::Dark,
                glasses: true,
                index: 3
            }
        );
        for bad in [
            "XBNg1",
            "FBN1",
            "FXG1",
            "FBG",
            "FBG0",
            "FBG01",
            "FBG1a",
            "fbg1",
            "FBNg",
            "MDG99999999999",
        ] {
            assert!(parse_participant_code(bad).is_err(), "{bad}");
        }
    }

    fn code_strategy() -> impl Strategy<Value = String> {
        (
            "[FM]",
            "[BD]",
            prop_oneof![Just("G"), Just("Ng")],
            1u32..=u32::MAX,
        )
            .prop_map(|(g, l, gl, i)| format!("{g}{l}{gl}{i}"))
    }

    proptest! {
        #[test]
        fn participant_code_round_trip(s in code_strategy()) {
            prop_assert_eq!(parse_participant_code(&s).unwrap().to_string(), s);
        }

        #[test]
        fn parsed_frames_are_valid(
            dets in proptest::collection::vec((0usize..6, 0u32..600, 0u32..600, 0u32..100, 0u32..100, 0.0f64..=1.0), 0..8)
        ) {
            let frame = FrameDetection::new(7, dets.iter().map(|&(l, x, y, w, h, c)| {
                Detection::new(DetectionLabel::ALL[l], BoundingBox::new(x, y, x + w + 1, y + h + 1).unwrap(), c).unwrap()
            }).collect());
            let back = read_detection_log(frame.to_log_line().as_bytes()).unwrap();
            prop_assert_eq!(&back[0], &frame);
            for d in &back[0].detections {
                prop_assert!((0.0..=1.0).contains(&d.confidence()));
                prop_assert!(d.bbox.x_min() < d.bbox.x_max() && d.bbox.y_min() < d.bbox.y_max());
            }
        }
    }
}
