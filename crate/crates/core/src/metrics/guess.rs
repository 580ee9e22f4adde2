use crate::trial_core::Group;

/// Correct-guess indicators for steps `n0 + 1..=N` and their mean.
///
/// A guesser who always predicts the currently smaller group scores 1 when
/// right, 0 when wrong and 1/2 when the groups are tied. The mean is `None`
/// when there are no adaptive steps.
pub fn correct_guess(groups: &[Group], n0: usize) -> (Vec<f64>, Option<f64>) {
    let (mut n1, mut n2) = (0usize, 0usize);
    let mut series = Vec::with_capacity(groups.len().saturating_sub(n0));
    for (i, &g) in groups.iter().enumerate() {
        if i >= n0 {
            let cg = match n1.cmp(&n2) {
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => f64::from(u8::from(g == Group::One)),
                std::cmp::Ordering::Greater => f64::from(u8::from(g == Group::Two)),
            };
            series.push(cg);
        }
        match g {
            Group::One => n1 += 1,
            Group::Two => n2 += 1,
        }
    }
    let mean = (!series.is_empty()).then(|| series.iter().sum::<f64>() / series.len() as f64);
    (series, mean)
}
