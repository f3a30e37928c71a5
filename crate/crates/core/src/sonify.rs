//! Sonification of the Riccati dynamics.
//!
//! Pitch follows the Riccati field: `phi` sampled on a uniform `t` grid is
//! min-max normalized onto `[base_pitch, base_pitch + pitch_span]` and
//! snapped to the nearest scale degree (ties snap downward). Since `phi`
//! is strictly decreasing the raw contour is non-increasing. Duration
//! follows `eta in (1/2, 1)`, binned at {0.625, 0.75, 0.875} into
//! eighth/quarter/half/whole notes. Velocity is constant.
//!
//! Documents serialize as Standard MIDI Files, format 0, one track; a
//! structural parser reads them back for round-trip checks.

use crate::error::{Error, Result};
use crate::series::{eta_deriv_direct, EtaPoint, SeriesAccuracy};

pub const DEFAULT_TICKS_PER_QUARTER: u16 = 480;
const VELOCITY: u8 = 80;
const MIN_BPM: f64 = 20.0;
const MAX_BPM: f64 = 300.0;
/// Below this the tempo meta-event's microseconds-per-quarter overflows 3 bytes.
const MIN_REPRESENTABLE_BPM: f64 = 60_000_000.0 / 0xFF_FFFF as f64;

/// Melody generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MelodyConfig {
    pub a: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    /// Scale degrees as semitone offsets from `base_pitch`, in [0, 11],
    /// strictly increasing.
    pub scale: Vec<u8>,
    pub base_pitch: u8,
    pub pitch_span: u8,
    pub tempo_bpm: f64,
    pub target_seconds: Option<f64>,
}

pub fn major_scale() -> Vec<u8> {
    vec![0, 2, 4, 5, 7, 9, 11]
}

impl Default for MelodyConfig {
    fn default() -> Self {
        theme_preset()
    }
}

/// Short melodic theme over the fast-moving part of the trajectory.
pub fn theme_preset() -> MelodyConfig {
    MelodyConfig {
        a: 1.0,
        t_start: 0.5,
        t_end: 8.0,
        steps: 16,
        scale: major_scale(),
        base_pitch: 60,
        pitch_span: 24,
        tempo_bpm: 96.0,
        target_seconds: None,
    }
}

/// Full composition preset: tempo rescaled to a five-minute playback.
pub fn composition_preset() -> MelodyConfig {
    MelodyConfig { steps: 128, target_seconds: Some(300.0), ..theme_preset() }
}

impl MelodyConfig {
    pub fn validate(&self) -> Result<()> {
        EtaPoint::new(self.a, self.t_start)?;
        if !self.t_end.is_finite() || self.t_end <= self.t_start {
            return Err(Error::Config(format!(
                "t_end must be finite and > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("steps must be >= 2, got {}", self.steps)));
        }
        if self.scale.is_empty() || self.scale.windows(2).any(|w| w[0] >= w[1]) || *self.scale.last().unwrap() > 11 {
            return Err(Error::Config("scale must be non-empty, strictly increasing, entries in 0..=11".into()));
        }
        if self.pitch_span == 0 || self.base_pitch as u32 + self.pitch_span as u32 > 127 {
            return Err(Error::Config(format!(
                "pitch range [{}, {}] must stay within 0..=127 with span >= 1",
                self.base_pitch,
                self.base_pitch as u32 + self.pitch_span as u32
            )));
        }
        if !self.tempo_bpm.is_finite() || self.tempo_bpm < MIN_REPRESENTABLE_BPM {
            return Err(Error::Config(format!("tempo_bpm must be finite and >= {MIN_REPRESENTABLE_BPM:.2}")));
        }
        if let Some(s) = self.target_seconds {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::Config(format!("target_seconds must be finite and > 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// One note: MIDI pitch, length in ticks, velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteEvent {
    pub pitch: u8,
    pub duration_ticks: u32,
    pub velocity: u8,
}

/// A single-track, format-0 MIDI document.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiDocument {
    pub ticks_per_quarter: u16,
    pub tempo_bpm: f64,
    pub events: Vec<NoteEvent>,
}

impl MidiDocument {
    pub fn new(ticks_per_quarter: u16, tempo_bpm: f64, events: Vec<NoteEvent>) -> Result<Self> {
        if ticks_per_quarter == 0 || ticks_per_quarter > 0x7FFF {
            return Err(Error::Config(format!("ticks_per_quarter must be in 1..=32767, got {ticks_per_quarter}")));
        }
        if !tempo_bpm.is_finite() || tempo_bpm < MIN_REPRESENTABLE_BPM {
            return Err(Error::Config(format!("tempo {tempo_bpm} bpm not representable in a tempo meta-event")));
        }
        for e in &events {
            if e.pitch > 127 || e.velocity == 0 || e.velocity > 127 || e.duration_ticks == 0 {
                return Err(Error::Config(format!("note out of MIDI range: {e:?}")));
            }
        }
        Ok(MidiDocument { ticks_per_quarter, tempo_bpm, events })
    }

    /// Playback length in seconds at the document tempo.
    pub fn playback_seconds(&self) -> f64 {
        let ticks: u64 = self.events.iter().map(|e| e.duration_ticks as u64).sum();
        ticks as f64 / self.ticks_per_quarter as f64 * 60.0 / self.tempo_bpm
    }
}

/// Samples the trajectory and returns the notes plus the raw
/// (pre-quantization) pitch contour.
pub fn melody_with_contour(cfg: &MelodyConfig) -> Result<(Vec<NoteEvent>, Vec<f64>)> {
    cfg.validate()?;
    let acc = SeriesAccuracy::default();
    let n = cfg.steps;
    let mut etas = Vec::with_capacity(n);
    let mut phis = Vec::with_capacity(n);
    for i in 0..n {
        let t = cfg.t_start + (cfg.t_end - cfg.t_start) * i as f64 / (n - 1) as f64;
        let p = EtaPoint::new(cfg.a, t)?;
        let e0 = eta_deriv_direct(&p, 0, &acc);
        let e1 = eta_deriv_direct(&p, 1, &acc);
        if !e0.error_estimate.is_finite() || !e1.error_estimate.is_finite() {
            return Err(Error::NonConvergence(format!(
                "series has no remainder bound at t = {t} for a = {}",
                cfg.a
            )));
        }
        etas.push(e0.value);
        phis.push(e1.value / e0.value);
    }
    let (phi_min, phi_max) = (phis[n - 1], phis[0]);
    let denom = phi_max - phi_min;
    if !(denom > 0.0) {
        return Err(Error::Config(format!(
            "phi is not strictly decreasing over [{}, {}]; range too narrow to map",
            cfg.t_start, cfg.t_end
        )));
    }
    let contour: Vec<f64> = phis
        .iter()
        .map(|&phi| cfg.base_pitch as f64 + cfg.pitch_span as f64 * (phi - phi_min) / denom)
        .collect();
    let events: Vec<NoteEvent> = contour
        .iter()
        .zip(&etas)
        .map(|(&raw, &eta)| NoteEvent {
            pitch: snap_to_scale(raw, cfg),
            duration_ticks: duration_ticks(eta, DEFAULT_TICKS_PER_QUARTER),
            velocity: VELOCITY,
        })
        .collect();
    Ok((events, contour))
}

/// Pitch from `phi`, duration from `eta`; exactly `steps` notes.
pub fn melody_from_riccati(cfg: &MelodyConfig) -> Result<Vec<NoteEvent>> {
    melody_with_contour(cfg).map(|(events, _)| events)
}

fn snap_to_scale(raw: f64, cfg: &MelodyConfig) -> u8 {
    let lo = cfg.base_pitch as u32;
    let hi = lo + cfg.pitch_span as u32;
    let mut best = lo;
    let mut best_dist = f64::INFINITY;
    for p in lo..=hi {
        if !cfg.scale.contains(&(((p - lo) % 12) as u8)) {
            continue;
        }
        let d = (p as f64 - raw).abs();
        if d < best_dist {
            best = p;
            best_dist = d;
        }
    }
    best as u8
}

fn duration_ticks(eta: f64, tpq: u16) -> u32 {
    let tpq = tpq as u32;
    if eta < 0.625 {
        tpq / 2 // eighth
    } else if eta < 0.75 {
        tpq // quarter
    } else if eta < 0.875 {
        2 * tpq // half
    } else {
        4 * tpq // whole
    }
}

/// Builds the document; with `target_seconds` set, the tempo is rescaled
/// so playback lands on the target (error: required tempo outside
/// [20, 300] bpm).
pub fn compose(cfg: &MelodyConfig) -> Result<MidiDocument> {
    let events = melody_from_riccati(cfg)?;
    let tempo = match cfg.target_seconds {
        None => cfg.tempo_bpm,
        Some(target) => {
            let ticks: u64 = events.iter().map(|e| e.duration_ticks as u64).sum();
            let beats = ticks as f64 / DEFAULT_TICKS_PER_QUARTER as f64;
            let bpm = beats * 60.0 / target;
            if !(MIN_BPM..=MAX_BPM).contains(&bpm) {
                return Err(Error::InfeasibleTempo { bpm });
            }
            bpm
        }
    };
    MidiDocument::new(DEFAULT_TICKS_PER_QUARTER, tempo, events)
}

fn push_vlq(buf: &mut Vec<u8>, value: u32) {
    debug_assert!(value < 1 << 28);
    for shift in [21u32, 14, 7] {
        if value >> shift != 0 {
            buf.push((value >> shift & 0x7F | 0x80) as u8);
        }
    }
    buf.push((value & 0x7F) as u8);
}

/// Serializes a document as a Standard MIDI File (format 0, one track):
/// tempo meta-event, note-on/note-off pairs with variable-length deltas,
/// end-of-track. Deterministic byte for byte.
pub fn write_midi(doc: &MidiDocument) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend(b"MThd");
    out.extend(6u32.to_be_bytes());
    out.extend(0u16.to_be_bytes()); // format 0
    out.extend(1u16.to_be_bytes()); // one track
    out.extend(doc.ticks_per_quarter.to_be_bytes());

    let mut track = Vec::new();
    let usq = (60_000_000.0 / doc.tempo_bpm).round() as u32;
    push_vlq(&mut track, 0);
    track.extend([0xFF, 0x51, 0x03]);
    track.extend(&usq.to_be_bytes()[1..]);
    for e in &doc.events {
        push_vlq(&mut track, 0);
        track.extend([0x90, e.pitch, e.velocity]);
        push_vlq(&mut track, e.duration_ticks);
        track.extend([0x80, e.pitch, 0x40]);
    }
    push_vlq(&mut track, 0);
    track.extend([0xFF, 0x2F, 0x00]);

    out.extend(b"MTrk");
    out.extend((track.len() as u32).to_be_bytes());
    out.extend(track);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Midi("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn vlq(&mut self) -> Result<u32> {
        let mut v: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            v = v << 7 | (b & 0x7F) as u32;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::Midi("variable-length quantity longer than 4 bytes".into()))
    }
}

/// Structural parser for the files [`write_midi`] emits (format 0, one
/// track, tempo meta, strictly paired note-on/note-off). The round-trip
/// oracle for the writer.
pub fn parse_midi(bytes: &[u8]) -> Result<MidiDocument> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != b"MThd" || r.u32()? != 6 {
        return Err(Error::Midi("missing MThd header".into()));
    }
    if r.u16()? != 0 {
        return Err(Error::Midi("not a format-0 file".into()));
    }
    if r.u16()? != 1 {
        return Err(Error::Midi("format 0 must contain exactly one track".into()));
    }
    let division = r.u16()?;
    if division & 0x8000 != 0 {
        return Err(Error::Midi("SMPTE division not supported".into()));
    }
    if r.take(4)? != b"MTrk" {
        return Err(Error::Midi("missing MTrk chunk".into()));
    }
    let len = r.u32()? as usize;
    let track_end = r.pos + len;
    if track_end > bytes.len() {
        return Err(Error::Midi("track length overruns the data".into()));
    }

    let mut tempo_bpm = None;
    let mut events = Vec::new();
    let mut open: Option<(u8, u8)> = None; // (pitch, velocity)
    loop {
        if r.pos >= track_end {
            return Err(Error::Midi("track ended without end-of-track".into()));
        }
        let delta = r.vlq()?;
        let status = r.u8()?;
        match status {
            0xFF => {
                let meta = r.u8()?;
                let mlen = r.vlq()? as usize;
                let data = r.take(mlen)?;
                match meta {
                    0x51 => {
                        if mlen != 3 {
                            return Err(Error::Midi("tempo meta-event must carry 3 bytes".into()));
                        }
                        let usq = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        tempo_bpm = Some(60_000_000.0 / usq as f64);
                    }
                    0x2F => break,
                    _ => {}
                }
            }
            0x90 => {
                if open.is_some() {
                    return Err(Error::Midi("overlapping notes are not structural output".into()));
                }
                let pitch = r.u8()?;
                let vel = r.u8()?;
                open = Some((pitch, vel));
            }
            0x80 => {
                let pitch = r.u8()?;
                let _vel = r.u8()?;
                match open.take() {
                    Some((p, v)) if p == pitch => {
                        events.push(NoteEvent { pitch: p, duration_ticks: delta, velocity: v })
                    }
                    _ => return Err(Error::Midi("note-off without matching note-on".into())),
                }
            }
            other => return Err(Error::Midi(format!("unsupported status byte 0x{other:02X}"))),
        }
    }
    let tempo_bpm = tempo_bpm.ok_or_else(|| Error::Midi("no tempo meta-event".into()))?;
    MidiDocument::new(division, tempo_bpm, events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes() {
        let doc = MidiDocument::new(480, 120.0, vec![]).unwrap();
        let bytes = write_midi(&doc);
        assert_eq!(&bytes[..8], &[0x4D, 0x54, 0x68, 0x64, 0, 0, 0, 6]);
        // degenerate document still parses
        let back = parse_midi(&bytes).unwrap();
        assert!(back.events.is_empty());
    }

    #[test]
    fn single_note_encoding() {
        let doc = MidiDocument::new(480, 120.0, vec![NoteEvent { pitch: 60, duration_ticks: 480, velocity: 80 }])
            .unwrap();
        let bytes = write_midi(&doc);
        let hay: Vec<u8> = vec![0x90, 0x3C, 80, 0x83, 0x60, 0x80, 0x3C, 0x40];
        assert!(
            bytes.windows(hay.len()).any(|w| w == hay.as_slice()),
            "note-on / vlq 480 / note-off sequence not found"
        );
    }

    #[test]
    fn vlq_known_values() {
        let mut b = Vec::new();
        push_vlq(&mut b, 0);
        push_vlq(&mut b, 0x7F);
        push_vlq(&mut b, 0x80);
        push_vlq(&mut b, 480);
        push_vlq(&mut b, 0x0FFF_FFFF);
        assert_eq!(b, vec![0x00, 0x7F, 0x81, 0x00, 0x83, 0x60, 0xFF, 0xFF, 0xFF, 0x7F]);
    }

    #[test]
    fn two_step_melody_hits_extremes() {
        let cfg = MelodyConfig { steps: 2, ..theme_preset() };
        let (notes, contour) = melody_with_contour(&cfg).unwrap();
        assert_eq!(notes.len(), 2);
        assert_eq!(contour[0], (cfg.base_pitch + cfg.pitch_span) as f64);
        assert_eq!(contour[1], cfg.base_pitch as f64);
    }

    #[test]
    fn contour_non_increasing_and_quantized_in_scale() {
        let cfg = MelodyConfig { steps: 24, a: 2.0, ..theme_preset() };
        let (notes, contour) = melody_with_contour(&cfg).unwrap();
        assert!(contour.windows(2).all(|w| w[1] <= w[0]));
        assert!(notes.windows(2).all(|w| w[1].pitch <= w[0].pitch));
        for n in &notes {
            assert!(cfg.scale.contains(&((n.pitch - cfg.base_pitch) % 12)));
            assert!(n.pitch >= cfg.base_pitch && n.pitch <= cfg.base_pitch + cfg.pitch_span);
        }
    }

    #[test]
    fn later_notes_last_longer() {
        // eta is strictly increasing, so durations are non-decreasing in t
        let cfg = MelodyConfig { steps: 32, a: 2.0, ..theme_preset() };
        let notes = melody_from_riccati(&cfg).unwrap();
        assert!(notes.windows(2).all(|w| w[1].duration_ticks >= w[0].duration_ticks));
        assert!(notes.last().unwrap().duration_ticks > notes[0].duration_ticks);
    }

    #[test]
    fn config_validation_errors() {
        let mut cfg = theme_preset();
        cfg.steps = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = theme_preset();
        cfg.scale = vec![0, 0];
        assert!(cfg.validate().is_err());
        let mut cfg = theme_preset();
        cfg.scale = vec![0, 12];
        assert!(cfg.validate().is_err());
        let mut cfg = theme_preset();
        cfg.base_pitch = 120;
        cfg.pitch_span = 24;
        assert!(cfg.validate().is_err());
        let mut cfg = theme_preset();
        cfg.t_end = cfg.t_start;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn compose_without_target_keeps_tempo() {
        let doc = compose(&theme_preset()).unwrap();
        assert_eq!(doc.tempo_bpm, 96.0);
        let ticks: u64 = doc.events.iter().map(|e| e.duration_ticks as u64).sum();
        let expect = ticks as f64 / 480.0 * 60.0 / 96.0;
        assert_eq!(doc.playback_seconds(), expect);
    }

    #[test]
    fn compose_infeasible_target() {
        let mut cfg = theme_preset();
        cfg.target_seconds = Some(36_000.0); // an hour from 16 notes: < 20 bpm
        assert!(matches!(compose(&cfg), Err(Error::InfeasibleTempo { .. })));
    }

    #[test]
    fn roundtrip_composition() {
        let doc = compose(&composition_preset()).unwrap();
        let bytes = write_midi(&doc);
        let back = parse_midi(&bytes).unwrap();
        assert_eq!(back.events, doc.events);
        assert_eq!(back.ticks_per_quarter, doc.ticks_per_quarter);
        // tempo survives up to the 3-byte microsecond rounding
        assert!((back.tempo_bpm - doc.tempo_bpm).abs() / doc.tempo_bpm < 1e-6);
    }
}
