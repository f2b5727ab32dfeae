//! Python bindings: synthetic data, training, gated inference, evaluation,
//! cross-validation and descriptors.

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fuselage_core::dataset::{group_kfold, Sample as CoreSample};
use fuselage_core::features::{extract, FeatureKind};
use fuselage_core::image::{to_grayscale, BinaryMask, RgbImage};
use fuselage_core::pipeline::{
    self as pl, DefectMap as CoreMap, MetricsReport, Mode, ModelArtifact, PipelineConfig as CoreConfig,
};
use fuselage_core::surf::{detect, DetectorParams};
use fuselage_core::synth::{generate_dataset, DefectKind, SynthConfig};
use fuselage_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Image { .. } => PyIOError::new_err(e.to_string()),
        Error::Lookup(_) => PyKeyError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for fuselage_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// An 8-bit RGB image.
#[pyclass(name = "Image", module = "fuselage", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: RgbImage,
}

#[pymethods]
impl PyImage {
    /// Builds an image from interleaved RGB bytes, row-major.
    #[new]
    fn new(width: usize, height: usize, data: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: RgbImage::new(width, height, data).py()?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RgbImage::load_png(path).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_png(path).py()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// An image with its binary defect mask.
#[pyclass(name = "Sample", module = "fuselage", frozen, from_py_object)]
#[derive(Clone)]
struct PySample {
    inner: CoreSample,
}

#[pymethods]
impl PySample {
    #[staticmethod]
    fn load(id: &str, image_path: &str, mask_path: &str) -> PyResult<Self> {
        let image = RgbImage::load_png(image_path).py()?;
        let mask = BinaryMask::load_png(mask_path).py()?;
        Ok(Self {
            inner: CoreSample::new(id, image, mask).py()?,
        })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn image(&self) -> PyImage {
        PyImage {
            inner: self.inner.image.clone(),
        }
    }

    /// Mask bytes, 1 for defect pixels.
    fn mask_bytes(&self) -> Vec<u8> {
        self.inner.mask.data().to_vec()
    }

    fn defect_pixels(&self) -> usize {
        self.inner.mask.count_ones()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sample({:?}, {}x{})",
            self.inner.id,
            self.inner.image.width(),
            self.inner.image.height()
        )
    }
}

#[pyclass(name = "PipelineConfig", module = "fuselage", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: CoreConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        patch_size = 65,
        feature = "lbp",
        mode = "washed",
        sigma = 1.5,
        iv_threshold = 3.0,
        surf_threshold = DetectorParams::DEFAULT_THRESHOLD,
        expand = None,
        c = 1.0,
        seed = 0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        patch_size: usize,
        feature: &str,
        mode: &str,
        sigma: f64,
        iv_threshold: f64,
        surf_threshold: f64,
        expand: Option<bool>,
        c: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let mut inner = CoreConfig {
            patch_size,
            feature: feature.parse().py()?,
            mode: mode.parse().py()?,
            sigma,
            iv_threshold,
            expand,
            seed,
            ..CoreConfig::default()
        };
        inner.detector.threshold = surf_threshold;
        inner.train.c = c;
        inner.train.seed = seed;
        inner.validate().py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn patch_size(&self) -> usize {
        self.inner.patch_size
    }

    #[getter]
    fn feature(&self) -> String {
        self.inner.feature.to_string()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn iv_threshold(&self) -> f64 {
        self.inner.iv_threshold
    }

    #[getter]
    fn surf_threshold(&self) -> f64 {
        self.inner.detector.threshold
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn expansion_enabled(&self) -> bool {
        self.inner.expansion_enabled()
    }

    /// The same configuration with a different preprocessing mode.
    fn with_mode(&self, mode: &str) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.mode = mode.parse::<Mode>().py()?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "PipelineConfig(patch_size={}, feature='{}', mode='{}', iv_threshold={}, surf_threshold={})",
            self.inner.patch_size, self.inner.feature, self.inner.mode, self.inner.iv_threshold, self.inner.detector.threshold
        )
    }
}

#[pyclass(name = "Metrics", module = "fuselage", frozen)]
struct PyMetrics {
    inner: MetricsReport,
}

#[pymethods]
impl PyMetrics {
    #[getter]
    fn tp(&self) -> usize {
        self.inner.tp
    }

    #[getter]
    fn fp(&self) -> usize {
        self.inner.fp
    }

    #[getter]
    fn tn(&self) -> usize {
        self.inner.tn
    }

    #[getter(r#fn)]
    fn fn_(&self) -> usize {
        self.inner.fn_
    }

    #[getter]
    fn sensitivity(&self) -> f64 {
        self.inner.sensitivity
    }

    #[getter]
    fn specificity(&self) -> f64 {
        self.inner.specificity
    }

    #[getter]
    fn accuracy(&self) -> f64 {
        self.inner.accuracy
    }

    fn false_positive_rate(&self) -> f64 {
        self.inner.false_positive_rate()
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "Metrics(tp={}, fp={}, tn={}, fn={}, sensitivity={:.4}, specificity={:.4}, accuracy={:.4})",
            m.tp, m.fp, m.tn, m.fn_, m.sensitivity, m.specificity, m.accuracy
        )
    }
}

/// Per-patch decisions for one image.
#[pyclass(name = "DefectMap", module = "fuselage", frozen)]
struct PyDefectMap {
    inner: CoreMap,
}

#[pymethods]
impl PyDefectMap {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreMap::from_json(text).py()?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn image_id(&self) -> &str {
        &self.inner.image_id
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.grid().rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.grid().cols()
    }

    fn defect_count(&self) -> usize {
        self.inner.defect_count()
    }

    /// `(row, col, decision, provenance, score)` per patch in grid order;
    /// row and col are the patch's pixel anchor.
    fn entries(&self) -> Vec<(usize, usize, String, String, Option<f64>)> {
        self.inner
            .grid()
            .anchors()
            .zip(self.inner.entries())
            .map(|(a, e)| {
                let provenance = serde_json::to_value(e.provenance)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default();
                (a.row, a.col, e.decision.to_string(), provenance, e.score)
            })
            .collect()
    }

    /// Scores the map against a sample's mask.
    fn evaluate(&self, sample: &PySample) -> PyResult<PyMetrics> {
        Ok(PyMetrics {
            inner: pl::evaluate_mask(&self.inner, &sample.inner.mask).py()?,
        })
    }

    /// The image with defect patches outlined.
    fn overlay(&self, image: &PyImage) -> PyResult<PyImage> {
        Ok(PyImage {
            inner: pl::draw_overlay(&image.inner, &self.inner).py()?,
        })
    }
}

/// A trained classifier plus the configuration it was trained with.
#[pyclass(name = "Model", module = "fuselage", frozen)]
struct PyModel {
    inner: ModelArtifact,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pl::load_model(path).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        pl::save_model(&self.inner, path).py()
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: ModelArtifact::from_bytes(data).py()?,
        })
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    #[getter]
    fn config(&self) -> PyConfig {
        PyConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.model.weights.clone()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.model.bias
    }

    /// Gated inference. `config` defaults to the training configuration.
    #[pyo3(signature = (image, image_id = "image", config = None))]
    fn infer(&self, py: Python<'_>, image: &PyImage, image_id: &str, config: Option<PyConfig>) -> PyResult<PyDefectMap> {
        let cfg = config.map_or_else(|| self.inner.config.clone(), |c| c.inner);
        let map = py.detach(|| pl::infer(&self.inner.model, image_id, &image.inner, &cfg, None)).py()?;
        Ok(PyDefectMap { inner: map })
    }

    /// Classifies every patch, without gating.
    #[pyo3(signature = (image, image_id = "image", config = None))]
    fn classify_all(
        &self,
        py: Python<'_>,
        image: &PyImage,
        image_id: &str,
        config: Option<PyConfig>,
    ) -> PyResult<PyDefectMap> {
        let cfg = config.map_or_else(|| self.inner.config.clone(), |c| c.inner);
        let map = py
            .detach(|| pl::classify_all(&self.inner.model, image_id, &image.inner, &cfg, None))
            .py()?;
        Ok(PyDefectMap { inner: map })
    }

    /// Gated vs full-grid timing as a dict.
    #[pyo3(signature = (image, config = None))]
    fn benchmark<'py>(
        &self,
        py: Python<'py>,
        image: &PyImage,
        config: Option<PyConfig>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config.map_or_else(|| self.inner.config.clone(), |c| c.inner);
        let t = py
            .detach(|| pl::benchmark(&self.inner.model, "image", &image.inner, &cfg, None))
            .py()?;
        let d = PyDict::new(py);
        d.set_item("full_seconds", t.full_seconds)?;
        d.set_item("gated_seconds", t.gated_seconds)?;
        d.set_item("full_patches", t.full_patches)?;
        d.set_item("gated_patches", t.gated_patches)?;
        d.set_item("speedup", t.speedup)?;
        Ok(d)
    }
}

fn parse_kind(name: &str) -> PyResult<DefectKind> {
    match name {
        "scratch" => Ok(DefectKind::Scratch),
        "dent" => Ok(DefectKind::Dent),
        other => Err(PyValueError::new_err(format!("unknown defect kind `{other}`"))),
    }
}

/// Generates synthetic fuselage scenes with ground-truth masks.
#[pyfunction]
#[pyo3(signature = (count, seed = 7, width = 1024, height = 1024, defects = 2, kinds = None, dirt = 0.0))]
fn synth_dataset(
    py: Python<'_>,
    count: usize,
    seed: u64,
    width: usize,
    height: usize,
    defects: usize,
    kinds: Option<Vec<String>>,
    dirt: f64,
) -> PyResult<Vec<PySample>> {
    let mut cfg = SynthConfig {
        width,
        height,
        defect_count: defects,
        dirt_level: dirt,
        seed,
        ..SynthConfig::default()
    };
    if let Some(k) = kinds {
        cfg.kinds = k.iter().map(|s| parse_kind(s)).collect::<PyResult<_>>()?;
    }
    let samples = py.detach(|| generate_dataset(&cfg, count)).py()?;
    Ok(samples.into_iter().map(|inner| PySample { inner }).collect())
}

fn core_samples(samples: &[PySample]) -> Vec<CoreSample> {
    samples.iter().map(|s| s.inner.clone()).collect()
}

/// Trains a model on the balanced patches of `samples`.
#[pyfunction]
#[pyo3(signature = (samples, config = None))]
fn train(py: Python<'_>, samples: Vec<PySample>, config: Option<PyConfig>) -> PyResult<PyModel> {
    let cfg = config.map_or_else(CoreConfig::default, |c| c.inner);
    let samples = core_samples(&samples);
    let inner = py.detach(|| pl::train_model(&samples, &cfg, None)).py()?;
    Ok(PyModel { inner })
}

/// Grouped k-fold cross-validation. Returns `(per_fold_metrics, mean_dict, csv_text)`.
#[pyfunction]
#[pyo3(signature = (samples, k = 10, config = None))]
fn cross_validate<'py>(
    py: Python<'py>,
    samples: Vec<PySample>,
    k: usize,
    config: Option<PyConfig>,
) -> PyResult<(Vec<PyMetrics>, Bound<'py, PyDict>, String)> {
    let cfg = config.map_or_else(CoreConfig::default, |c| c.inner);
    let samples = core_samples(&samples);
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let plan = group_kfold(&ids, k, cfg.seed).py()?;
    let report = py.detach(|| pl::cross_validate(&samples, &plan, &cfg, None)).py()?;
    let mean = PyDict::new(py);
    mean.set_item("accuracy", report.mean.accuracy)?;
    mean.set_item("sensitivity", report.mean.sensitivity)?;
    mean.set_item("specificity", report.mean.specificity)?;
    let folds = report.folds.iter().map(|f| PyMetrics { inner: f.metrics }).collect();
    Ok((folds, mean, report.to_csv()))
}

/// Descriptor of a whole image treated as one patch.
#[pyfunction]
fn patch_features(image: &PyImage, kind: &str) -> PyResult<Vec<f64>> {
    let kind: FeatureKind = kind.parse().py()?;
    Ok(extract(&image.inner, kind, None, "").py()?.values)
}

/// Hessian keypoints as `(x, y, scale, response)` tuples.
#[pyfunction]
#[pyo3(signature = (image, threshold = DetectorParams::DEFAULT_THRESHOLD))]
fn detect_keypoints(image: &PyImage, threshold: f64) -> PyResult<Vec<(usize, usize, f64, f64)>> {
    let params = DetectorParams {
        threshold,
        ..DetectorParams::default()
    };
    let kps = detect(&to_grayscale(&image.inner), &params).py()?;
    Ok(kps.iter().map(|k| (k.x, k.y, k.scale, k.response)).collect())
}

#[pymodule]
fn fuselage(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<PyDefectMap>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(patch_features, m)?)?;
    m.add_function(wrap_pyfunction!(detect_keypoints, m)?)?;
    Ok(())
}
