//! Parsing of registry study documents (the public v2 study-record JSON
//! structure) into [`StudyRecord`]s.
//!
//! Parsing is open-world at the document level — unknown fields are ignored —
//! but closed at the value level: any string outside a closed categorical set
//! is a hard error. Optional dates that fail to parse become missing with a
//! logged warning; structurally required fields that are absent make the
//! document malformed.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde_json::Value;

use super::types::*;

/// Parses one serialized study document.
pub fn parse_study(document_text: &str) -> Result<StudyRecord, ParseError> {
    let doc: Value = serde_json::from_str(document_text)
        .map_err(|e| ParseError::MalformedDocument(format!("not valid JSON: {e}")))?;
    parse_study_value(&doc)
}

/// Parses an already-deserialized study document.
pub fn parse_study_value(doc: &Value) -> Result<StudyRecord, ParseError> {
    let protocol = doc
        .get("protocolSection")
        .ok_or_else(|| malformed("protocolSection missing"))?;

    let nct_id = req_str(protocol, &["identificationModule", "nctId"])?;
    validate_nct_id(&nct_id)?;

    let status_module = protocol
        .get("statusModule")
        .ok_or_else(|| malformed("statusModule missing"))?;
    let overall_status = OverallStatus::from_registry(&req_str(status_module, &["overallStatus"])?);
    let first_submit_raw = req_str(status_module, &["studyFirstSubmitDate"])?;
    let first_submit_date = parse_date(&first_submit_raw).ok_or_else(|| {
        malformed(&format!(
            "studyFirstSubmitDate {first_submit_raw:?} is not a parseable date"
        ))
    })?;
    let start_date = opt_date(&nct_id, "startDate", status_module, &["startDateStruct", "date"]);
    let completion_date = opt_date(
        &nct_id,
        "completionDate",
        status_module,
        &["completionDateStruct", "date"],
    );
    if let (Some(start), Some(end)) = (start_date, completion_date) {
        if end < start {
            return Err(ParseError::ConstraintViolation(format!(
                "{nct_id}: completion date {end} precedes start date {start}"
            )));
        }
    }

    let design_module = protocol
        .get("designModule")
        .ok_or_else(|| malformed("designModule missing"))?;
    let study_type = StudyType::from_registry(&req_str(design_module, &["studyType"])?);
    let design = parse_design(protocol, design_module)?;

    let (arms, interventions) = parse_arms_interventions(protocol)?;
    let eligibility = parse_eligibility(protocol)?;

    let has_results = doc.get("hasResults").and_then(Value::as_bool).unwrap_or(false);
    let adverse_events = parse_adverse_events(doc, &nct_id)?;

    let (locations_count, location_text) = parse_locations(protocol);

    let description = protocol.get("descriptionModule");
    let brief_summary = description.and_then(|m| opt_str(m, "briefSummary"));
    let detailed_description = description.and_then(|m| opt_str(m, "detailedDescription"));

    let conditions_module = protocol.get("conditionsModule");
    let conditions = conditions_module
        .map(|m| str_array(m, "conditions"))
        .unwrap_or_default();
    let condition_keywords = conditions_module
        .map(|m| str_array(m, "keywords"))
        .unwrap_or_default();

    let sponsor = protocol
        .get("sponsorCollaboratorsModule")
        .and_then(|m| m.get("leadSponsor"));
    let sponsor_class = sponsor.and_then(|s| opt_str(s, "class"));
    let sponsor_name = sponsor.and_then(|s| opt_str(s, "name"));

    let (document_flags, protocol_pdf_links) = parse_documents(doc);

    Ok(StudyRecord {
        nct_id,
        overall_status,
        study_type,
        has_results,
        start_date,
        completion_date,
        first_submit_date,
        design,
        arms,
        interventions,
        eligibility,
        adverse_events,
        locations_count,
        location_text,
        brief_summary,
        detailed_description,
        conditions,
        condition_keywords,
        sponsor_class,
        sponsor_name,
        document_flags,
        protocol_pdf_links,
    })
}

/// The inclusion filter: completed or terminated, interventional, results
/// posted, completion date reported, registered before the cutoff.
pub fn passes_inclusion(record: &StudyRecord, cutoff: NaiveDate) -> bool {
    matches!(
        record.overall_status,
        OverallStatus::Completed | OverallStatus::Terminated
    ) && record.study_type == StudyType::Interventional
        && record.has_results
        && record.completion_date.is_some()
        && record.first_submit_date < cutoff
}

fn malformed(msg: &str) -> ParseError {
    ParseError::MalformedDocument(msg.to_string())
}

fn validate_nct_id(id: &str) -> Result<(), ParseError> {
    let ok = id.len() == 11
        && id.starts_with("NCT")
        && id.bytes().skip(3).all(|b| b.is_ascii_digit());
    if ok {
        Ok(())
    } else {
        Err(ParseError::ConstraintViolation(format!(
            "nct id {id:?} does not match NCT########"
        )))
    }
}

fn get_path<'a>(value: &'a Value, path: &[&str]) -> Option<&'a Value> {
    let mut cur = value;
    for key in path {
        cur = cur.get(key)?;
    }
    Some(cur)
}

fn req_str(value: &Value, path: &[&str]) -> Result<String, ParseError> {
    get_path(value, path)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| malformed(&format!("required field {} missing", path.join("."))))
}

fn opt_str(value: &Value, key: &str) -> Option<String> {
    value
        .get(key)
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

fn str_array(value: &Value, key: &str) -> Vec<String> {
    value
        .get(key)
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

fn opt_u64(value: &Value, key: &str) -> Option<u64> {
    value.get(key).and_then(Value::as_u64)
}

/// Registry dates come as `YYYY-MM-DD` or month-precision `YYYY-MM`; the
/// latter is completed to the first day of the month.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(d) = NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d") {
        return Some(d);
    }
    None
}

fn opt_date(nct_id: &str, field: &str, value: &Value, path: &[&str]) -> Option<NaiveDate> {
    let raw = get_path(value, path).and_then(Value::as_str)?;
    match parse_date(raw) {
        Some(d) => Some(d),
        None => {
            log::warn!("{nct_id}: unparseable {field} {raw:?} treated as missing");
            None
        }
    }
}

fn parse_design(protocol: &Value, design_module: &Value) -> Result<DesignInfo, ParseError> {
    let design_info = design_module.get("designInfo");
    let primary_purpose = design_info
        .and_then(|d| opt_str(d, "primaryPurpose"))
        .map(|s| PrimaryPurpose::from_registry(&s))
        .transpose()?;
    let masking = design_info
        .and_then(|d| get_path(d, &["maskingInfo", "masking"]))
        .and_then(Value::as_str)
        .map(Masking::from_registry)
        .transpose()?;
    let allocation = design_info.and_then(|d| opt_str(d, "allocation"));
    let intervention_model = design_info.and_then(|d| opt_str(d, "interventionModel"));

    let mut phases = BTreeSet::new();
    if let Some(items) = design_module.get("phases").and_then(Value::as_array) {
        for item in items {
            let text = item
                .as_str()
                .ok_or_else(|| malformed("phases entries must be strings"))?;
            phases.insert(Phase::from_registry(text)?);
        }
    }

    let oversight_has_dmc = protocol
        .get("oversightModule")
        .and_then(|m| m.get("oversightHasDmc"))
        .and_then(Value::as_bool);
    let enrollment_count = design_module
        .get("enrollmentInfo")
        .and_then(|e| opt_u64(e, "count"));

    Ok(DesignInfo {
        primary_purpose,
        masking,
        allocation,
        intervention_model,
        phases,
        oversight_has_dmc,
        enrollment_count,
    })
}

fn parse_arms_interventions(
    protocol: &Value,
) -> Result<(Vec<ArmGroup>, Vec<InterventionInfo>), ParseError> {
    let module = match protocol.get("armsInterventionsModule") {
        Some(m) => m,
        None => return Ok((Vec::new(), Vec::new())),
    };

    let mut arms = Vec::new();
    if let Some(items) = module.get("armGroups").and_then(Value::as_array) {
        for item in items {
            let label = req_str(item, &["label"])?;
            let group_type = ArmGroupType::from_registry(&req_str(item, &["type"])?)?;
            arms.push(ArmGroup {
                label,
                group_type,
                description: opt_str(item, "description"),
            });
        }
    }

    let mut interventions = Vec::new();
    if let Some(items) = module.get("interventions").and_then(Value::as_array) {
        for item in items {
            let intervention_type = InterventionType::from_registry(&req_str(item, &["type"])?)?;
            interventions.push(InterventionInfo {
                intervention_type,
                name: req_str(item, &["name"])?,
                description: opt_str(item, "description"),
            });
        }
    }

    Ok((arms, interventions))
}

fn parse_eligibility(protocol: &Value) -> Result<EligibilityInfo, ParseError> {
    let module = protocol.get("eligibilityModule");
    let sex = module
        .and_then(|m| opt_str(m, "sex"))
        .map(|s| Sex::from_registry(&s))
        .transpose()?;
    let healthy_volunteers = module
        .and_then(|m| m.get("healthyVolunteers"))
        .and_then(Value::as_bool);
    Ok(EligibilityInfo {
        sex,
        healthy_volunteers,
    })
}

fn parse_adverse_events(doc: &Value, nct_id: &str) -> Result<Vec<AdverseEventEntry>, ParseError> {
    let module = match get_path(doc, &["resultsSection", "adverseEventsModule"]) {
        Some(m) => m,
        None => return Ok(Vec::new()),
    };
    let mut entries = Vec::new();
    for key in ["seriousEvents", "otherEvents"] {
        if let Some(events) = module.get(key).and_then(Value::as_array) {
            for event in events {
                let term = req_str(event, &["term"])?;
                let stats = event
                    .get("stats")
                    .and_then(Value::as_array)
                    .ok_or_else(|| malformed(&format!("{key} entry lacks stats")))?;
                for stat in stats {
                    let arm_group_id = req_str(stat, &["groupId"])?;
                    let num_affected = opt_u64(stat, "numAffected")
                        .ok_or_else(|| malformed("stats entry lacks numAffected"))?;
                    let num_at_risk = opt_u64(stat, "numAtRisk")
                        .ok_or_else(|| malformed("stats entry lacks numAtRisk"))?;
                    if num_at_risk > 0 && num_affected > num_at_risk {
                        return Err(ParseError::ConstraintViolation(format!(
                            "{nct_id}: event {term:?} arm {arm_group_id}: affected {num_affected} exceeds at-risk {num_at_risk}"
                        )));
                    }
                    entries.push(AdverseEventEntry {
                        arm_group_id,
                        event_term: term.clone(),
                        num_affected,
                        num_at_risk,
                    });
                }
            }
        }
    }
    Ok(entries)
}

fn parse_locations(protocol: &Value) -> (u64, Option<String>) {
    let locations = match get_path(protocol, &["contactsLocationsModule", "locations"])
        .and_then(Value::as_array)
    {
        Some(items) => items,
        None => return (0, None),
    };
    let mut parts = Vec::new();
    for loc in locations {
        let mut fields = Vec::new();
        for key in ["facility", "city", "state", "country"] {
            if let Some(text) = loc.get(key).and_then(Value::as_str) {
                if !text.is_empty() {
                    fields.push(text);
                }
            }
        }
        if !fields.is_empty() {
            parts.push(fields.join(", "));
        }
    }
    let text = if parts.is_empty() {
        None
    } else {
        Some(parts.join("; "))
    };
    (locations.len() as u64, text)
}

fn parse_documents(doc: &Value) -> (DocumentFlags, Vec<String>) {
    let mut flags = DocumentFlags::default();
    let mut links = Vec::new();
    if let Some(docs) = get_path(doc, &["documentSection", "largeDocumentModule", "largeDocs"])
        .and_then(Value::as_array)
    {
        for entry in docs {
            let truthy = |key: &str| entry.get(key).and_then(Value::as_bool).unwrap_or(false);
            flags.has_protocol |= truthy("hasProtocol");
            flags.has_sap |= truthy("hasSap");
            flags.has_icf |= truthy("hasIcf");
            if let Some(name) = entry.get("filename").and_then(Value::as_str) {
                links.push(name.to_string());
            }
        }
    }
    (flags, links)
}
