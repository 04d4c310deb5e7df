use pyo3::prelude::*;

#[pymodule]
fn lccd_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
