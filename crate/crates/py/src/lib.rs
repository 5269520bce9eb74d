use pyo3::prelude::*;

#[pymodule]
fn vidsent_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
