/// Stops once the monitored loss has not strictly decreased for `patience`
/// consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Records an epoch's loss; true when it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch >= self.best_epoch + self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_stops_after_patience() {
        let mut s = EarlyStopping::new(50);
        let mut stopped = None;
        for epoch in 1..=200 {
            s.observe(epoch, 1.0);
            if s.should_stop(epoch) {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(51));
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn improvement_resets_the_clock() {
        let mut s = EarlyStopping::new(3);
        let losses = [5.0, 4.0, 4.0, 4.0, 3.5, 3.6, 3.6, 3.6];
        let mut stop = None;
        for (k, &l) in losses.iter().enumerate() {
            s.observe(k + 1, l);
            if s.should_stop(k + 1) {
                stop = Some(k + 1);
                break;
            }
        }
        assert_eq!(stop, Some(8));
        assert_eq!(s.best(), 3.5);
    }

    #[test]
    fn nan_never_improves() {
        let mut s = EarlyStopping::new(2);
        assert!(!s.observe(1, f64::NAN));
        assert!(s.observe(2, 1.0));
    }
}
