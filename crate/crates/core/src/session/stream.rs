//! Arpeggiated note streams over fixed chord progressions.

use serde::{Deserialize, Serialize};

pub const NOTES_PER_CHORD: u64 = 4;
pub const RATE_RANGE: (f64, f64) = (0.25, 16.0);
pub const NOTE_LENGTH_RANGE: (f64, f64) = (0.05, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Progression {
    /// I–V–vi–IV in C major.
    PopInC,
    /// i–VI–III–VII in A minor.
    EpicInA,
    /// Twelve-bar blues in C with dominant sevenths.
    BluesInC,
}

const C: &[u8] = &[0, 4, 7];
const G: &[u8] = &[7, 11, 2];
const AM: &[u8] = &[9, 0, 4];
const F: &[u8] = &[5, 9, 0];
const C7: &[u8] = &[0, 4, 7, 10];
const F7: &[u8] = &[5, 9, 0, 3];
const G7: &[u8] = &[7, 11, 2, 5];

impl Progression {
    pub const ALL: [Progression; 3] = [
        Progression::PopInC,
        Progression::EpicInA,
        Progression::BluesInC,
    ];

    /// Chords as pitch classes relative to C.
    pub fn chords(self) -> &'static [&'static [u8]] {
        match self {
            Progression::PopInC => &[C, G, AM, F],
            Progression::EpicInA => &[AM, F, C, G],
            Progression::BluesInC => &[C7, C7, C7, C7, F7, F7, C7, C7, G7, F7, C7, G7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteStream {
    pub id: String,
    pub progression: Progression,
    /// Fraction of the step each note sounds for.
    pub note_length: f64,
    /// Notes per second.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub time: f64,
    /// Semitones above the base pitch, `0..12`.
    pub semitone: u8,
    pub on: bool,
}

impl NoteEvent {
    pub fn pitch_class(&self) -> &'static str {
        [
            "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
        ][self.semitone as usize % 12]
    }
}

impl NoteStream {
    /// Pitch of the `i`-th note.
    pub fn note(&self, i: u64) -> u8 {
        let chords = self.progression.chords();
        let chord = chords[((i / NOTES_PER_CHORD) % chords.len() as u64) as usize];
        chord[(i % NOTES_PER_CHORD) as usize % chord.len()]
    }

    /// Note events with `from <= time < to`, note-offs before note-ons at
    /// equal times.
    pub fn tick(&self, from: f64, to: f64) -> Vec<NoteEvent> {
        if !(to > from) || !(self.rate > 0.0) {
            return Vec::new();
        }
        let step = 1.0 / self.rate;
        let hold = self.note_length * step;
        let mut out = Vec::new();
        // a note started before `from` may still end inside the window
        let first = ((from - hold) * self.rate).floor().max(0.0) as u64;
        let mut i = first;
        loop {
            let on = i as f64 * step;
            if on >= to {
                break;
            }
            let off = on + hold;
            let semitone = self.note(i);
            if on >= from {
                out.push(NoteEvent {
                    time: on,
                    semitone,
                    on: true,
                });
            }
            if off >= from && off < to {
                out.push(NoteEvent {
                    time: off,
                    semitone,
                    on: false,
                });
            }
            i += 1;
        }
        out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.on.cmp(&b.on)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(progression: Progression, rate: f64) -> NoteStream {
        NoteStream {
            id: "s".into(),
            progression,
            note_length: 0.5,
            rate,
        }
    }

    #[test]
    fn rate_arithmetic() {
        let s = stream(Progression::PopInC, 2.0);
        let ev = s.tick(0.0, 2.0);
        assert_eq!(ev.iter().filter(|e| e.on).count(), 4);
        assert_eq!(ev.iter().filter(|e| !e.on).count(), 4);
    }

    #[test]
    fn first_chord_is_c_major() {
        let s = stream(Progression::PopInC, 4.0);
        for e in s.tick(0.0, 1.0) {
            assert!(["C", "E", "G"].contains(&e.pitch_class()));
        }
    }

    #[test]
    fn windows_compose_and_stay_in_octave() {
        for p in Progression::ALL {
            let s = stream(p, 3.0);
            let whole = s.tick(0.0, 10.0);
            let mut parts = Vec::new();
            let mut t = 0.0;
            while t < 10.0 {
                parts.extend(s.tick(t, t + 0.37));
                t += 0.37;
            }
            parts.retain(|e| e.time < 10.0);
            assert_eq!(
                whole.iter().filter(|e| e.on).count(),
                parts.iter().filter(|e| e.on).count()
            );
            assert!(whole.iter().all(|e| e.semitone < 12));
            assert_eq!(s.tick(0.0, 10.0), whole);
        }
    }
}
