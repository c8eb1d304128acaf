//! Loader for the UCI Communities and Crime data.
//!
//! Accepts either the original headerless `communities.data` file (128
//! comma-separated attributes, `?` for missing values) or any CSV with a
//! header row naming the target and group-share columns.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::berk::TrainingSet;
use crate::dataset::Matrix;
use crate::error::{AuditError, Result};

/// Attribute names of the headerless UCI file, in column order.
pub const UCI_COLUMNS: [&str; 128] = [
    "state", "county", "community", "communityname", "fold", "population", "householdsize",
    "racepctblack", "racePctWhite", "racePctAsian", "racePctHisp", "agePct12t21",
    "agePct12t29", "agePct16t24", "agePct65up", "numbUrban", "pctUrban", "medIncome",
    "pctWWage", "pctWFarmSelf", "pctWInvInc", "pctWSocSec", "pctWPubAsst", "pctWRetire",
    "medFamInc", "perCapInc", "whitePerCap", "blackPerCap", "indianPerCap", "AsianPerCap",
    "OtherPerCap", "HispPerCap", "NumUnderPov", "PctPopUnderPov", "PctLess9thGrade",
    "PctNotHSGrad", "PctBSorMore", "PctUnemployed", "PctEmploy", "PctEmplManu",
    "PctEmplProfServ", "PctOccupManu", "PctOccupMgmtProf", "MalePctDivorce", "MalePctNevMarr",
    "FemalePctDiv", "TotalPctDiv", "PersPerFam", "PctFam2Par", "PctKids2Par",
    "PctYoungKids2Par", "PctTeen2Par", "PctWorkMomYoungKids", "PctWorkMom", "NumIlleg",
    "PctIlleg", "NumImmig", "PctImmigRecent", "PctImmigRec5", "PctImmigRec8", "PctImmigRec10",
    "PctRecentImmig", "PctRecImmig5", "PctRecImmig8", "PctRecImmig10", "PctSpeakEnglOnly",
    "PctNotSpeakEnglWell", "PctLargHouseFam", "PctLargHouseOccup", "PersPerOccupHous",
    "PersPerOwnOccHous", "PersPerRentOccHous", "PctPersOwnOccup", "PctPersDenseHous",
    "PctHousLess3BR", "MedNumBR", "HousVacant", "PctHousOccup", "PctHousOwnOcc",
    "PctVacantBoarded", "PctVacMore6Mos", "MedYrHousBuilt", "PctHousNoPhone", "PctWOFullPlumb",
    "OwnOccLowQuart", "OwnOccMedVal", "OwnOccHiQuart", "RentLowQ", "RentMedian", "RentHighQ",
    "MedRent", "MedRentPctHousInc", "MedOwnCostPctInc", "MedOwnCostPctIncNoMtg",
    "NumInShelters", "NumStreet", "PctForeignBorn", "PctBornSameState", "PctSameHouse85",
    "PctSameCity85", "PctSameState85", "LemasSwornFT", "LemasSwFTPerPop", "LemasSwFTFieldOps",
    "LemasSwFTFieldPerPop", "LemasTotalReq", "LemasTotReqPerPop", "PolicReqPerOffic",
    "PolicPerPop", "RacialMatchCommPol", "PctPolicWhite", "PctPolicBlack", "PctPolicHisp",
    "PctPolicAsian", "PctPolicMinor", "OfficAssgnDrugUnits", "NumKindsDrugsSeiz",
    "PolicAveOTWorked", "LandArea", "PopDens", "PctUsePubTrans", "PolicCars", "PolicOperBudg",
    "LemasPctPolicOnPatr", "LemasGangUnitDeploy", "LemasPctOfficDrugUn", "PolicBudgPerPop",
    "ViolentCrimesPerPop",
];

/// Identifier columns that carry no predictive information.
const NON_PREDICTIVE: [&str; 5] = ["state", "county", "community", "communityname", "fold"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitiesOptions {
    pub target_column: String,
    /// Share of the population in the group of interest, in `[0, 1]`.
    pub group_share_column: String,
    /// Rows with a share strictly above this are labelled protected.
    pub threshold: f64,
}

impl Default for CommunitiesOptions {
    fn default() -> Self {
        Self {
            target_column: "ViolentCrimesPerPop".into(),
            group_share_column: "racepctblack".into(),
            threshold: 0.5,
        }
    }
}

pub fn load_communities(path: impl AsRef<Path>, options: &CommunitiesOptions) -> Result<TrainingSet> {
    let file = std::fs::File::open(path.as_ref())?;
    read_communities(file, options)
}

pub fn read_communities<R: Read>(reader: R, options: &CommunitiesOptions) -> Result<TrainingSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(AuditError::InvalidParameter("empty communities file".into())),
    };

    let has_header = first.iter().any(|f| f == options.group_share_column);
    let (names, mut rows): (Vec<String>, Vec<csv::StringRecord>) = if has_header {
        (first.iter().map(str::to_string).collect(), Vec::new())
    } else if first.len() == UCI_COLUMNS.len() {
        (UCI_COLUMNS.iter().map(|s| s.to_string()).collect(), vec![first])
    } else {
        return Err(AuditError::MissingColumn(options.group_share_column.clone()));
    };
    for r in records {
        rows.push(r?);
    }
    if rows.is_empty() {
        return Err(AuditError::InvalidParameter("communities file has no data rows".into()));
    }

    let find = |name: &str| {
        names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| AuditError::MissingColumn(name.to_string()))
    };
    let target_col = find(&options.target_column)?;
    let share_col = find(&options.group_share_column)?;

    let parse = |row: usize, col: usize| -> Option<f64> {
        let v = rows[row].get(col)?;
        if v == "?" || v.is_empty() {
            None
        } else {
            v.parse().ok()
        }
    };
    let required = |row: usize, col: usize| {
        parse(row, col).ok_or_else(|| AuditError::Parse {
            row: row + 1,
            column: names[col].clone(),
            message: format!("expected a number, found `{}`", rows[row].get(col).unwrap_or("")),
        })
    };

    let n = rows.len();
    let mut target = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for i in 0..n {
        target.push(required(i, target_col)?);
        sensitive.push(usize::from(required(i, share_col)? > options.threshold));
    }
    if sensitive.iter().all(|&a| a == 0) || sensitive.iter().all(|&a| a == 1) {
        return Err(AuditError::InvalidParameter(format!(
            "no rows on one side of {} > {}",
            options.group_share_column, options.threshold
        )));
    }

    // keep numeric columns with no missing entries
    let keep: Vec<usize> = (0..names.len())
        .filter(|&j| j != target_col && !NON_PREDICTIVE.contains(&names[j].as_str()))
        .filter(|&j| (0..n).all(|i| parse(i, j).is_some()))
        .collect();
    let mut data = Vec::with_capacity(n * keep.len());
    for i in 0..n {
        for &j in &keep {
            data.push(parse(i, j).expect("filtered above"));
        }
    }
    let feature_names = keep.iter().map(|&j| names[j].clone()).collect();
    log::info!(
        "loaded {n} communities with {} complete numeric features",
        keep.len()
    );
    TrainingSet::new(Matrix::new(n, keep.len(), data)?, target, sensitive, feature_names)
}
