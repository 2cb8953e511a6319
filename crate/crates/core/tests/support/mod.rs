pub mod dense_qp;
pub mod instances;
