use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_round_trip_from_python() {
    use pseudogt_py::pseudogt_py;
    pyo3::append_to_inittab!(pseudogt_py);
    Python::initialize();
    Python::attach(|py| {
        let dir = tempfile_dir();
        let locals = PyDict::new(py);
        locals.set_item("tmp", dir.to_str().unwrap()).unwrap();
        py.run(
            c"
import pseudogt_py as pg
paths = pg.make_fixtures(tmp + '/src', count=2, width=64, height=48, seed=5)
stack = pg.ExposureStack.render(str(paths[0]), [-1.0, 0.0, 1.0])
assert stack.evs == [-1.0, 0.0, 1.0] and len(stack) == 3
same = pg.fuse([stack.frames[1]] * 3, 'mertens')
assert same.width == 64 and same.height == 48
assert len(pg.brisque_features(same)) == 36
cfg = pg.PipelineConfig('metrics = brisque\\nevs = -1,0,1\\ncalibration_groups = 2\\n')
cfg.seed = 11
summary = pg.generate_dataset(tmp + '/src', tmp + '/out', cfg, workers=1)
assert summary['records'] == 6, summary
records = pg.read_manifest(tmp + '/out/manifest.ndjson')
assert records[0]['seed'] == pg.derive_seed(11, records[0]['source_id'])
try:
    pg.PipelineConfig('bogus = 1')
    raise AssertionError('expected ValueError')
except ValueError as e:
    assert 'bogus' in str(e)
",
            None,
            Some(&locals),
        )
        .unwrap();
    });
    std::fs::remove_dir_all(dir_path()).ok();
}

fn dir_path() -> std::path::PathBuf {
    std::env::temp_dir().join(format!("pseudogt_py_test_{}", std::process::id()))
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = dir_path();
    std::fs::create_dir_all(&d).unwrap();
    d
}
