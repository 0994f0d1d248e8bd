//! One-call front end: parse a model, select a property and a partitioning,
//! and type-check the result.

use crate::error::{Error, Result};
use crate::lang::{
    parse_model, parse_partition, parse_property, type_check, ModelAst, PartitionSpec,
    PropertySpec, TypedModel, TypedProperty,
};

#[derive(Debug, Clone)]
pub struct Compiled {
    pub ast: ModelAst,
    pub model: TypedModel,
    pub property: TypedProperty,
    pub property_spec: PropertySpec,
    pub partition: PartitionSpec,
}

/// Compiles `src` for one property.
///
/// `property` is either the name of a property declared in the model or an
/// inline property such as `Pmax=? [F c=2]`. `partition` overrides the
/// model's `partition` declaration; with neither, every state goes into
/// partition 1.
pub fn compile(src: &str, property: &str, partition: Option<&str>) -> Result<Compiled> {
    let ast = parse_model(src)?;
    let property_spec = match ast.property(property) {
        Some(p) => p.clone(),
        None => {
            let is_name = property.chars().all(|c| c.is_alphanumeric() || c == '_');
            match parse_property(property, &ast) {
                Ok(p) => p,
                Err(_) if is_name => return Err(Error::UnknownProperty(property.to_string())),
                Err(e) => return Err(e.into()),
            }
        }
    };
    let partition = match partition {
        Some(text) => parse_partition(text, &ast)?,
        None => ast.partition.clone().unwrap_or_else(PartitionSpec::single),
    };
    let mut model = type_check(&ast, std::slice::from_ref(&property_spec), &partition)?;
    let property = model.properties.remove(0);
    Ok(Compiled {
        ast,
        model,
        property,
        property_spec,
        partition,
    })
}
