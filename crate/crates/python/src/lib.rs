//! Python bindings for the `pseudogt` library.
//!
//! ```python
//! import pseudogt_py as pg
//! stack = pg.ExposureStack.render("scene.png", [-2, 0, 2])
//! fused = pg.fuse(stack.frames, "mertens")
//! model = pg.NiqeModel.load("niqe.model")
//! print(model.score(fused))
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use pseudogt::config::PipelineConfig;
use pseudogt::dataset::{self, DatasetRecord};
use pseudogt::ensemble;
use pseudogt::exposure::{self, StyleCode};
use pseudogt::fusion::{Engine, FusionConfig};
use pseudogt::imgcore::{self, SrgbImage};
use pseudogt::iqa::{self, BrisqueRegressor};
use pseudogt::pipeline;
use pseudogt::synth;
use pseudogt::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingRegressor(_) => PyIOError::new_err(e.to_string()),
        Error::Config { .. }
        | Error::InvalidEnsembleConfig(_)
        | Error::InvalidFusionConfig(_)
        | Error::UnknownEngine(_)
        | Error::UnknownMetric(_)
        | Error::InvalidStyleCode(_)
        | Error::InvalidModel(_)
        | Error::ModelFormat { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// An 8-bit sRGB image (RGB, row-major).
#[pyclass(name = "Image", module = "pseudogt_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: SrgbImage,
}

#[pymethods]
impl PyImage {
    /// Builds an image from `width * height * 3` bytes.
    #[new]
    fn new(width: usize, height: usize, data: Vec<u8>) -> PyResult<Self> {
        SrgbImage::new(width, height, data).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        imgcore::load_srgb(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        imgcore::save_srgb(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.data())
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<(u8, u8, u8)> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err("pixel out of bounds"));
        }
        let [r, g, b] = self.inner.pixel(x, y);
        Ok((r, g, b))
    }

    fn mean_intensity(&self) -> PyResult<f64> {
        imgcore::mean_intensity(&self.inner).map_err(to_py)
    }

    fn clipped_pixels(&self) -> usize {
        self.inner.clipped_pixels()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Frames of one scene at several exposure values.
#[pyclass(name = "ExposureStack", module = "pseudogt_py", frozen)]
pub struct PyExposureStack {
    inner: exposure::ExposureStack,
}

#[pymethods]
impl PyExposureStack {
    /// Renders a linear source file at the given EVs.
    #[staticmethod]
    #[pyo3(signature = (path, evs = exposure::DEFAULT_EVS.to_vec(), source_id = None))]
    fn render(py: Python<'_>, path: PathBuf, evs: Vec<f64>, source_id: Option<String>) -> PyResult<Self> {
        let id = source_id.unwrap_or_else(|| pipeline::source_id(&path));
        py.detach(|| {
            let img = imgcore::load_image(&path)?;
            exposure::render_mes(&img, &evs, &id)
        })
        .map(|inner| Self { inner })
        .map_err(to_py)
    }

    /// Retargets an 8-bit image to each mean-intensity target (ascending).
    #[staticmethod]
    #[pyo3(signature = (image, targets = exposure::DEFAULT_TARGETS.to_vec(), source_id = "source".to_string()))]
    fn synthesize(py: Python<'_>, image: &PyImage, targets: Vec<f64>, source_id: String) -> PyResult<Self> {
        let codes = targets
            .iter()
            .map(|&t| StyleCode::new(t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        py.detach(|| exposure::synthesize_mes(&image.inner, &codes, &source_id))
            .map(|(inner, _)| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn frames(&self) -> Vec<PyImage> {
        self.inner.frames().iter().map(|f| PyImage { inner: f.clone() }).collect()
    }

    #[getter]
    fn evs(&self) -> Vec<f64> {
        self.inner.evs().to_vec()
    }

    #[getter]
    fn source_id(&self) -> String {
        self.inner.source_id().to_owned()
    }

    /// Writes `mes/<id>/<id>_ev±N.NN.png` under `out_dir`; returns the relative paths.
    fn save(&self, out_dir: PathBuf) -> PyResult<Vec<String>> {
        dataset::write_stack(&self.inner, &out_dir).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Fuses frames with `mertens`, `gradient`, `flat-weighted` or `ext:<command>`.
#[pyfunction]
#[pyo3(signature = (frames, engine = "mertens", epsilon = pseudogt::fusion::DEFAULT_EPSILON))]
fn fuse(py: Python<'_>, frames: Vec<PyImage>, engine: &str, epsilon: f64) -> PyResult<PyImage> {
    let engine = Engine::parse(engine).map_err(to_py)?;
    let cfg = FusionConfig {
        epsilon,
        ..FusionConfig::default()
    };
    let frames: Vec<SrgbImage> = frames.into_iter().map(|f| f.inner).collect();
    py.detach(|| engine.fuse(&frames, &cfg))
        .map(|inner| PyImage { inner })
        .map_err(to_py)
}

/// A fitted NIQE pristine model.
#[pyclass(name = "NiqeModel", module = "pseudogt_py", frozen)]
pub struct PyNiqeModel {
    inner: Arc<iqa::NiqeModel>,
}

#[pymethods]
impl PyNiqeModel {
    #[staticmethod]
    #[pyo3(signature = (images, patch_size = iqa::DEFAULT_PATCH_SIZE, sharpness_fraction = iqa::DEFAULT_SHARPNESS_FRACTION))]
    fn fit(py: Python<'_>, images: Vec<PyImage>, patch_size: usize, sharpness_fraction: f64) -> PyResult<Self> {
        let corpus: Vec<SrgbImage> = images.into_iter().map(|i| i.inner).collect();
        py.detach(|| iqa::fit_niqe_model(&corpus, patch_size, sharpness_fraction))
            .map(|m| Self { inner: Arc::new(m) })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        iqa::NiqeModel::load(path)
            .map(|m| Self { inner: Arc::new(m) })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    /// NIQE score; lower is better.
    fn score(&self, py: Python<'_>, image: &PyImage) -> PyResult<f64> {
        py.detach(|| iqa::niqe(&image.inner, &self.inner))
            .map(|s| s.value)
            .map_err(to_py)
    }

    #[getter]
    fn patch_size(&self) -> usize {
        self.inner.patch_size
    }

    fn covariance_rank(&self) -> usize {
        self.inner.covariance_rank()
    }
}

/// BRISQUE score with a linear regressor file, or the ranking-only fallback.
#[pyfunction]
#[pyo3(signature = (image, model = None))]
fn brisque(py: Python<'_>, image: &PyImage, model: Option<PathBuf>) -> PyResult<f64> {
    let reg = match model {
        Some(p) => BrisqueRegressor::load(p).map_err(to_py)?,
        None => BrisqueRegressor::fallback(),
    };
    py.detach(|| iqa::brisque(&image.inner, &reg))
        .map(|s| s.value)
        .map_err(to_py)
}

/// The 36 BRISQUE natural-scene-statistics features.
#[pyfunction]
fn brisque_features(image: &PyImage) -> PyResult<Vec<f64>> {
    iqa::brisque_features(&image.inner).map(|f| f.to_vec()).map_err(to_py)
}

/// Dataset-generation settings (`key = value` text format).
#[pyclass(name = "PipelineConfig", module = "pseudogt_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyPipelineConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyPipelineConfig {
    #[new]
    #[pyo3(signature = (text = "", base_dir = None))]
    fn new(text: &str, base_dir: Option<PathBuf>) -> PyResult<Self> {
        let base = base_dir.unwrap_or_else(|| PathBuf::from("."));
        PipelineConfig::parse(text, std::path::Path::new("<python>"), &base)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        PipelineConfig::load(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn metrics(&self) -> Vec<String> {
        self.inner.metrics.clone()
    }

    #[getter]
    fn engines(&self) -> Vec<String> {
        self.inner.engines.clone()
    }
}

fn record_dict<'py>(py: Python<'py>, r: &DatasetRecord) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("source_id", &r.source_id)?;
    d.set_item("input_path", &r.input_path)?;
    d.set_item("input_ev", r.input_ev)?;
    d.set_item("pseudo_gt_path", &r.pseudo_gt_path)?;
    d.set_item("scores", r.scores.clone())?;
    d.set_item("provenance", &r.provenance)?;
    d.set_item("seed", r.seed)?;
    Ok(d)
}

/// Runs the full pipeline over the PNG files in `input_dir`; returns a
/// summary dict. `workers` sizes the thread pool (default: all cores).
#[pyfunction]
#[pyo3(signature = (input_dir, out_dir, config, workers = None))]
fn generate_dataset<'py>(
    py: Python<'py>,
    input_dir: PathBuf,
    out_dir: PathBuf,
    config: &PyPipelineConfig,
    workers: Option<usize>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg = config.inner.clone();
    let summary = py
        .detach(|| {
            let inputs = pipeline::discover_inputs(&input_dir)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidEnsembleConfig(e.to_string()))?;
            pool.install(|| pipeline::generate_dataset(&inputs, &out_dir, &cfg))
        })
        .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("sources", summary.sources)?;
    d.set_item("accepted", summary.accepted)?;
    d.set_item("rejected", summary.rejected.iter().map(|r| r.source_id.clone()).collect::<Vec<_>>())?;
    d.set_item("failed", summary.failed.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>())?;
    d.set_item("records", summary.records.len())?;
    d.set_item("calibration_wins", summary.calibration.wins.clone())?;
    Ok(d)
}

#[pyfunction]
fn read_manifest<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
    let records = dataset::read_manifest(path).map_err(to_py)?;
    records.iter().map(|r| record_dict(py, r)).collect()
}

/// Corpus statistics for a manifest as a dict.
#[pyfunction]
fn corpus_stats<'py>(py: Python<'py>, manifest: PathBuf) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let s = py.detach(|| dataset::corpus_stats(manifest)).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("image_count", s.image_count)?;
    d.set_item("frame_count", s.frame_count)?;
    d.set_item("rejected_count", s.rejected_count)?;
    d.set_item("histogram", s.histogram.clone())?;
    let q: BTreeMap<String, Vec<f64>> = s.quantiles.iter().map(|(k, v)| (k.clone(), v.to_vec())).collect();
    d.set_item("quantiles", q)?;
    d.set_item("table", s.to_table())?;
    Ok(d)
}

/// Stable 64-bit seed for `label` under `seed`.
#[pyfunction]
fn derive_seed(seed: u64, label: &str) -> u64 {
    ensemble::derive_seed(seed, label)
}

/// Writes `count` seeded synthetic scenes to `out_dir` (16-bit linear PNGs,
/// or 8-bit sRGB with `srgb=True`).
#[pyfunction]
#[pyo3(signature = (out_dir, count = 20, width = 320, height = 240, seed = 0, srgb = false))]
fn make_fixtures(
    py: Python<'_>,
    out_dir: PathBuf,
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
    srgb: bool,
) -> PyResult<Vec<PathBuf>> {
    py.detach(|| {
        if !srgb {
            return synth::write_fixture_corpus(&out_dir, count, width, height, seed);
        }
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
            path: out_dir.clone(),
            cause: e.to_string(),
        })?;
        (0..count)
            .map(|i| {
                let p = out_dir.join(format!("natural_{i:03}.png"));
                imgcore::save_srgb(&p, &synth::natural_srgb(seed.wrapping_add(i as u64), width, height))?;
                Ok(p)
            })
            .collect()
    })
    .map_err(to_py)
}

#[pymodule]
pub fn pseudogt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyExposureStack>()?;
    m.add_class::<PyNiqeModel>()?;
    m.add_class::<PyPipelineConfig>()?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(brisque, m)?)?;
    m.add_function(wrap_pyfunction!(brisque_features, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(make_fixtures, m)?)?;
    m.add("ENGINES", Engine::BUILTIN.to_vec())?;
    Ok(())
}
