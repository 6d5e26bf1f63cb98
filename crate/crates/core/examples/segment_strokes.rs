//! Differentiates one synthetic recording and lists its strokes.

use inkscreen::kinematics::{analyze, SmoothingConfig};
use inkscreen::synthcohort::{generate_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let study = generate_study(&StudyRecipe {
        n_per_cohort: 1,
        tasks: vec![1],
        ..StudyRecipe::default()
    })?;
    let rec = &study.recordings[0];
    let (series, strokes) = analyze(rec, &SmoothingConfig::default())?;
    println!("{} task {}: {} samples, {} strokes", rec.participant_id, rec.task_id, rec.len(), strokes.len());
    println!("{:>5} {:>5} {:>9} {:>9} {:>10}", "start", "end", "kind", "ms", "mean |v|");
    for s in &strokes {
        let samples = s.samples(rec.samples());
        let ms = samples.last().unwrap().t - samples[0].t;
        let speed: f64 = s.range().map(|i| series.speed[i]).sum::<f64>() / s.len() as f64;
        println!("{:>5} {:>5} {:>9} {:>9.1} {:>10.3}", s.start, s.end, s.kind.to_string(), ms, speed);
    }
    Ok(())
}
