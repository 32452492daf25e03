use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::event::Polarity;
use crate::image::RgbImage;
use crate::window::Window;

/// Colors written for ON and OFF events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityColorMap {
    on: [u8; 3],
    off: [u8; 3],
}

impl Default for PolarityColorMap {
    fn default() -> Self {
        Self {
            on: [255, 0, 0],
            off: [0, 0, 255],
        }
    }
}

impl PolarityColorMap {
    pub fn new(on: [u8; 3], off: [u8; 3]) -> Result<Self, FusionError> {
        if on == off {
            return Err(FusionError::IndistinctColors);
        }
        Ok(Self { on, off })
    }

    pub fn on(&self) -> [u8; 3] {
        self.on
    }

    pub fn off(&self) -> [u8; 3] {
        self.off
    }

    #[inline]
    pub fn color(&self, p: Polarity) -> [u8; 3] {
        match p {
            Polarity::On => self.on,
            Polarity::Off => self.off,
        }
    }
}

/// Paints each pixel that fired inside the window with the color of its
/// latest event; every other pixel is copied from `image` unchanged.
///
/// The window is in stream order, so the last write per pixel is the
/// event with the greatest timestamp, ties going to the later event.
pub fn overlay(image: &RgbImage, window: &Window<'_>, colors: &PolarityColorMap) -> Result<RgbImage, FusionError> {
    let g = window.geometry();
    if !image.matches(g) {
        return Err(FusionError::GeometryMismatch {
            got_w: image.width(),
            got_h: image.height(),
            want_w: g.width(),
            want_h: g.height(),
        });
    }
    let mut out = image.clone();
    for e in window.events() {
        out.set_pixel(e.x as usize, e.y as usize, colors.color(e.p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{validate_stream, Event, SensorGeometry};
    use crate::window::duration_window;

    #[test]
    fn latest_event_wins() {
        let g = SensorGeometry::new(4, 3).unwrap();
        let s = validate_stream(
            vec![
                Event::new(5, 1, 1, Polarity::On),
                Event::new(7, 1, 1, Polarity::Off),
                Event::new(7, 2, 2, Polarity::Off),
                Event::new(7, 2, 2, Polarity::On),
            ],
            g,
        )
        .unwrap();
        let img = RgbImage::filled(4, 3, [10, 20, 30]);
        let colors = PolarityColorMap::default();
        let out = overlay(&img, &duration_window(&s, 10, 10), &colors).unwrap();
        assert_eq!(out.pixel(1, 1), [0, 0, 255]);
        // equal timestamps: later in stream order wins
        assert_eq!(out.pixel(2, 2), [255, 0, 0]);
        assert_eq!(out.pixel(0, 0), [10, 20, 30]);
    }

    #[test]
    fn empty_window_is_identity() {
        let g = SensorGeometry::new(4, 3).unwrap();
        let s = validate_stream(vec![Event::new(5, 1, 1, Polarity::On)], g).unwrap();
        let img = RgbImage::new(4, 3, (0..36).collect());
        let out = overlay(&img, &duration_window(&s, 5, 0), &PolarityColorMap::default()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn errors() {
        assert_eq!(PolarityColorMap::new([1, 2, 3], [1, 2, 3]), Err(FusionError::IndistinctColors));
        let g = SensorGeometry::new(4, 3).unwrap();
        let s = validate_stream(vec![], g).unwrap();
        let img = RgbImage::filled(3, 3, [0; 3]);
        assert!(matches!(
            overlay(&img, &duration_window(&s, 5, 5), &PolarityColorMap::default()),
            Err(FusionError::GeometryMismatch { .. })
        ));
    }
}
