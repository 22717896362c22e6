//! A small synthetic corpus laid out exactly like real input: four
//! ten-second videos (three with a shot), training clips, person
//! detections, annotations and a config to run it all.

use std::path::{Path, PathBuf};

use gunsmoke_core::audio::{write_wav, PcmSignal};
use gunsmoke_core::eval::{
    BackgroundColor, CaseAnnotation, CaseAttributes, GroundTruthEvent, GunPosition, Intensity, Obstruction, Pose,
    ResolutionClass, SmokeColor,
};
use gunsmoke_core::flow::write_ppm;
use gunsmoke_core::geometry::{BBox, Point};
use gunsmoke_core::shooter::{write_person_detections, BoxSource, PersonBox};
use gunsmoke_core::synthetic::{add_gunshot, ambient_audio, render_scene, SceneSpec};

use crate::data::{AUDIO_FILE, DETECTIONS_FILE, FRAMES_DIR};
use crate::Result;

pub const CONFIG_FILE: &str = "gunsmoke.toml";
pub const FPS: f64 = 2.0;
pub const SECONDS: f64 = 10.0;
pub const SAMPLE_RATE: u32 = 16_000;
const TRAINING_CLIPS: usize = 20;

/// Videos of the corpus and the frame of their shot, if any.
pub const VIDEOS: [(&str, Option<usize>); 4] = [
    ("range_a", Some(8)),
    ("range_b", Some(12)),
    ("range_c", Some(5)),
    ("street_quiet", None),
];

const CONFIG: &str = r#"# Demo corpus configuration.
[input]
videos_dir = "videos"
training_dir = "training"
annotations_dir = "annotations"
frame_rate = 2.0

[output]
runs_dir = "runs"

[audio.codebook]
k = 32
max_iter = 50
seed = 7

# Nine of the 32 windows hold a shot, and the classifier is confident
# enough that a percentile start would admit only two samples.
[scoring.spl]
lambda0 = 0.5
pseudo_fraction = 0.28
"#;

/// Geometry shared by every video; the muzzle sits halfway between the
/// shooter's head proxy and the smoke puff's first position.
pub fn scene(shot_frame: Option<usize>) -> SceneSpec {
    SceneSpec {
        width: 240,
        height: 180,
        shooter: BBox::new(40.0, 60.0, 64.0, 140.0),
        bystander: Some(BBox::new(180.0, 70.0, 204.0, 150.0)),
        muzzle: Point::new(82.0, 67.0),
        smoke_start: Point::new(112.0, 62.0),
        smoke_velocity: [3.0, -1.0],
        smoke_radius: 12.0,
        shot_frame: shot_frame.unwrap_or(usize::MAX),
        smoke_frames: if shot_frame.is_some() { 4 } else { 0 },
    }
}

fn attributes() -> CaseAttributes {
    CaseAttributes {
        smoke_color: SmokeColor::Grey,
        smoke_intensity: Intensity::new(3).expect("in range"),
        background_color: BackgroundColor::Grey,
        resolution_class: ResolutionClass::Good,
        camera_far: false,
        gun_stable: true,
        shooter_moves: false,
        camera_moves: false,
        gun_position: GunPosition::Sideways,
        obstruction: Obstruction::Nothing,
        pose: Pose::Standing,
    }
}

#[derive(Debug, Clone)]
pub struct FixtureSummary {
    pub config: PathBuf,
    pub videos: usize,
    pub shots: usize,
}

fn wav(path: &Path, samples: Vec<f64>, id: &str) -> Result<()> {
    std::fs::create_dir_all(path.parent().expect("nested path"))?;
    write_wav(path, &PcmSignal::new(samples, SAMPLE_RATE, id))?;
    Ok(())
}

/// Write the corpus under `dir`. The same seed always gives the same bytes.
pub fn write_fixture(dir: &Path, seed: u64) -> Result<FixtureSummary> {
    std::fs::create_dir_all(dir)?;
    let n_frames = (SECONDS * FPS) as usize;
    let mut shots = 0;
    for (k, (id, shot)) in VIDEOS.iter().enumerate() {
        let vseed = seed.wrapping_mul(31).wrapping_add(k as u64 * 101);
        let vdir = dir.join("videos").join(id);
        let spec = scene(*shot);

        let mut audio = ambient_audio(vseed, SECONDS, SAMPLE_RATE);
        if let Some(f) = shot {
            add_gunshot(&mut audio, SAMPLE_RATE, *f as f64 / FPS, vseed + 1);
        }
        wav(&vdir.join(AUDIO_FILE), audio, id)?;

        std::fs::create_dir_all(vdir.join(FRAMES_DIR))?;
        let mut people = Vec::new();
        for n in 0..n_frames {
            let frame = render_scene(&spec, vseed + 2, n);
            write_ppm(vdir.join(FRAMES_DIR).join(format!("frame_{n:05}.ppm")), &frame)?;
            for b in [Some(spec.shooter), spec.bystander].into_iter().flatten() {
                people.push(PersonBox {
                    bbox: b,
                    score: 0.95,
                    source: BoxSource::External,
                    frame_index: n,
                });
            }
        }
        let mut det = Vec::new();
        write_person_detections(&mut det, &people, "person")?;
        std::fs::write(vdir.join(DETECTIONS_FILE), det)?;

        if let Some(f) = shot {
            shots += 1;
            let event = GroundTruthEvent {
                frame_index: *f,
                smoke_bbox: spec.smoke_bbox(*f).expect("smoke visible in the shot frame"),
                shooter_bbox: spec.shooter,
                muzzle_point: spec.muzzle,
            };
            let ann = CaseAnnotation::from_attributes(*id, attributes(), (spec.width, spec.height), vec![event]);
            let path = dir.join("annotations").join(format!("{id}.json"));
            std::fs::create_dir_all(path.parent().expect("nested path"))?;
            std::fs::write(path, serde_json::to_vec_pretty(&ann).expect("serializable"))?;
        }
    }

    for i in 0..TRAINING_CLIPS {
        let s = seed.wrapping_mul(977).wrapping_add(1000 + i as u64);
        let mut pos = ambient_audio(s, 3.0, SAMPLE_RATE);
        add_gunshot(&mut pos, SAMPLE_RATE, 0.3 + 0.08 * i as f64, s + 1);
        wav(&dir.join(format!("training/positive/shot_{i:02}.wav")), pos, "positive")?;
        let neg = ambient_audio(s + 5000, 3.0, SAMPLE_RATE);
        wav(
            &dir.join(format!("training/negative/ambient_{i:02}.wav")),
            neg,
            "negative",
        )?;
    }

    let config = dir.join(CONFIG_FILE);
    std::fs::write(&config, CONFIG)?;
    Ok(FixtureSummary {
        config,
        videos: VIDEOS.len(),
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotated_muzzle_lies_between_head_and_smoke() {
        let s = scene(Some(8));
        let head = Point::new(s.shooter.center().x, s.shooter.y0 + 0.15 * s.shooter.height());
        let mid = Point::new(0.5 * (head.x + s.smoke_start.x), 0.5 * (head.y + s.smoke_start.y));
        assert_eq!(mid, s.muzzle);
    }
}
