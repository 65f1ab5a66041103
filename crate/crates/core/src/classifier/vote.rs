use std::fmt::Write;

use super::mlp::MlpModel;
use super::{ClassifierError, Diagnosis, DiseaseClass, SpotPrediction};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

/// Majority vote over spot predictions. Equal tallies go to the class with
/// the larger summed probability, then to `LeafBlast`.
pub fn tally_votes<T: Scalar>(image_id: &str, preds: Vec<SpotPrediction<T>>) -> Result<Diagnosis<T>, ClassifierError> {
    if preds.is_empty() {
        return Err(ClassifierError::NoSpots);
    }
    let mut votes = [0usize; 2];
    let mut mass = [T::zero(); 2];
    for p in &preds {
        votes[p.predicted_class.index()] += 1;
        mass[0] = mass[0] + p.probabilities[0];
        mass[1] = mass[1] + p.probabilities[1];
    }
    let final_class = if votes[1] > votes[0] || (votes[1] == votes[0] && mass[1] > mass[0]) {
        DiseaseClass::BrownSpot
    } else {
        DiseaseClass::LeafBlast
    };
    let confidence = T::of_usize(votes[final_class.index()]) / T::of_usize(preds.len());
    Ok(Diagnosis { image_id: image_id.to_string(), spot_predictions: preds, votes, final_class, confidence })
}

/// Classifies every spot independently and votes.
pub fn classify_image<T: Scalar>(
    m: &MlpModel<T>,
    image_id: &str,
    spots: &[FeatureVector<T>],
) -> Result<Diagnosis<T>, ClassifierError> {
    if spots.is_empty() {
        return Err(ClassifierError::NoSpots);
    }
    let preds = spots.iter().map(|f| m.predict(f)).collect::<Result<Vec<_>, _>>()?;
    tally_votes(image_id, preds)
}

/// A test image: its true class and the features of its detected spots.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage<T> {
    pub id: String,
    pub class: DiseaseClass,
    pub spots: Vec<FeatureVector<T>>,
}

/// Result for one evaluated image; `predicted` is `None` when no spots were found.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutcome {
    pub id: String,
    pub truth: DiseaseClass,
    pub predicted: Option<DiseaseClass>,
    /// Per-spot predictions, for spot-level accuracy.
    pub spot_predictions: Vec<DiseaseClass>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AccuracyReport {
    pub images: usize,
    pub correct_images: usize,
    pub undiagnosable: usize,
    pub spots: usize,
    pub correct_spots: usize,
    /// `confusion[truth][predicted]` over diagnosable images.
    pub confusion: [[usize; 2]; 2],
}

impl AccuracyReport {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a ImageOutcome>) -> Self {
        let mut r = AccuracyReport { images: 0, correct_images: 0, undiagnosable: 0, spots: 0, correct_spots: 0, confusion: [[0; 2]; 2] };
        for o in outcomes {
            r.images += 1;
            match o.predicted {
                Some(p) => {
                    r.confusion[o.truth.index()][p.index()] += 1;
                    if p == o.truth {
                        r.correct_images += 1;
                    }
                }
                None => r.undiagnosable += 1,
            }
            r.spots += o.spot_predictions.len();
            r.correct_spots += o.spot_predictions.iter().filter(|&&c| c == o.truth).count();
        }
        r
    }

    /// Fraction of images classified correctly; undiagnosable images count as wrong.
    pub fn image_accuracy(&self) -> f64 {
        ratio(self.correct_images, self.images)
    }

    pub fn spot_accuracy(&self) -> f64 {
        ratio(self.correct_spots, self.spots)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "images: {} ({} undiagnosable)", self.images, self.undiagnosable);
        let _ = writeln!(s, "image accuracy: {:.2}% ({}/{})", 100.0 * self.image_accuracy(), self.correct_images, self.images);
        let _ = writeln!(s, "spot accuracy: {:.2}% ({}/{})", 100.0 * self.spot_accuracy(), self.correct_spots, self.spots);
        let _ = writeln!(s, "confusion (rows = truth, cols = predicted):");
        let _ = writeln!(s, "{:>12} {:>10} {:>10}", "", "LeafBlast", "BrownSpot");
        for c in DiseaseClass::ALL {
            let row = self.confusion[c.index()];
            let _ = writeln!(s, "{:>12} {:>10} {:>10}", c.to_string(), row[0], row[1]);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let c = &self.confusion;
        format!(
            "images,correct_images,undiagnosable,image_accuracy,spots,correct_spots,spot_accuracy,\
             blast_as_blast,blast_as_brown,brown_as_blast,brown_as_brown\n{},{},{},{:.6},{},{},{:.6},{},{},{},{}\n",
            self.images,
            self.correct_images,
            self.undiagnosable,
            self.image_accuracy(),
            self.spots,
            self.correct_spots,
            self.spot_accuracy(),
            c[0][0],
            c[0][1],
            c[1][0],
            c[1][1]
        )
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

/// Per-image (voted) and per-spot accuracy with a confusion matrix.
pub fn evaluate<T: Scalar>(
    m: &MlpModel<T>,
    testset: &[LabeledImage<T>],
) -> Result<(AccuracyReport, Vec<ImageOutcome>), ClassifierError> {
    if testset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut outcomes = Vec::with_capacity(testset.len());
    for img in testset {
        let (predicted, spot_predictions) = match classify_image(m, &img.id, &img.spots) {
            Ok(d) => (Some(d.final_class), d.spot_predictions.iter().map(|p| p.predicted_class).collect()),
            Err(ClassifierError::NoSpots) => (None, Vec::new()),
            Err(e) => return Err(e),
        };
        outcomes.push(ImageOutcome { id: img.id.clone(), truth: img.class, predicted, spot_predictions });
    }
    Ok((AccuracyReport::from_outcomes(&outcomes), outcomes))
}
