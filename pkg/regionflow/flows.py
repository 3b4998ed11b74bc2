#!/usr/bin/env python

#stdlib imports
from collections import namedtuple,OrderedDict
from concurrent.futures import ThreadPoolExecutor
import json
import logging

#third party imports
import numpy as np
import pandas as pd

#local imports
from .dataset import DataSet,RegionFlowException,saveFrame

#service class codes as they appear in flow files
GENERAL = 'G'
SPECIALIZED = 'S'
SERVICE_ALIASES = {'G':GENERAL,'GENERAL':GENERAL,
                   'S':SPECIALIZED,'SPECIALIZED':SPECIALIZED}

#exclusion reasons, in the order records are screened
REASONS = ['unmatched_hospital','missing_zone','non_general_hospital','out_of_universe']

TRUE_STRINGS = set(['1','true','t','yes','y'])
FALSE_STRINGS = set(['0','false','f','no','n'])

FlowRecord = namedtuple('FlowRecord',['patient_zone','hospital_id','count','service_class'])

logger = logging.getLogger(__name__)

class FilterPolicy(object):
    """Switches controlling which flow records are kept during ingestion.
    """
    def __init__(self,drop_missing_zone=True,require_roster_match=True,
                 general_hospitals_only=True,in_universe_only=True):
        """
        :param drop_missing_zone:
          Exclude records with an empty patient zone.
        :param require_roster_match:
          Exclude records whose hospital is not in the hospital roster.
        :param general_hospitals_only:
          Exclude records at hospitals not flagged as general medical/surgical.
        :param in_universe_only:
          Exclude records whose patient zone is outside the declared zone universe.
        """
        self.drop_missing_zone = bool(drop_missing_zone)
        self.require_roster_match = bool(require_roster_match)
        self.general_hospitals_only = bool(general_hospitals_only)
        self.in_universe_only = bool(in_universe_only)

    def requiresRoster(self):
        """Return True when any of the switches needs hospital information.
        """
        return self.require_roster_match or self.general_hospitals_only

    def asDict(self):
        return OrderedDict([('drop_missing_zone',self.drop_missing_zone),
                            ('require_roster_match',self.require_roster_match),
                            ('general_hospitals_only',self.general_hospitals_only),
                            ('in_universe_only',self.in_universe_only)])

class IngestStats(object):
    """Record counts retained and excluded (by reason) during ingestion.
    """
    KEYS = ['input_records','retained_records'] + REASONS + ['input_admissions','retained_admissions']
    def __init__(self,counts=None):
        self._counts = OrderedDict([(key,0) for key in self.KEYS])
        if counts is not None:
            for key,value in counts.items():
                if key not in self._counts:
                    raise RegionFlowException('Unknown ingest statistic "%s"' % key)
                self._counts[key] = int(value)

    def __getitem__(self,key):
        return self._counts[key]

    def __add__(self,other):
        total = IngestStats()
        for key in self.KEYS:
            total._counts[key] = self._counts[key] + other._counts[key]
        return total

    def __eq__(self,other):
        return isinstance(other,IngestStats) and self._counts == other._counts

    def getExcluded(self):
        """Return the total number of excluded records.
        """
        return sum([self._counts[reason] for reason in REASONS])

    def asDict(self):
        return OrderedDict(self._counts)

    def save(self,filename,metadata=None):
        """Write the statistics as a flat JSON object.

        :param filename:
          Output JSON file name.
        :param metadata:
          Optional run metadata; its seed and config_hash are added as flat keys.
        """
        mydict = self.asDict()
        if metadata is not None:
            mydict['seed'] = metadata['seed']
            mydict['config_hash'] = metadata['config_hash']
        with open(filename,'wt') as f:
            json.dump(mydict,f,indent=2)
            f.write('\n')

def _parseBoolean(value):
    tvalue = str(value).strip().lower()
    if tvalue in TRUE_STRINGS:
        return True
    if tvalue in FALSE_STRINGS:
        return False
    return None

class HospitalRoster(DataSet):
    """
    Hospitals with their home zone, general medical/surgical flag and admission volume.
    """
    REQFIELDS = ['hospital_id','home_zone','is_general','admissions']
    def __init__(self,dataframe):
        """Construct a HospitalRoster from a pandas DataFrame.

        :param dataframe:
          pandas DataFrame with columns hospital_id, home_zone, is_general and admissions.
        :raises RegionFlowException:
          When columns are missing, hospital ids repeat or a row cannot be parsed.
        """
        self.checkColumns(dataframe,self.REQFIELDS,'Hospital roster')
        df = dataframe[self.REQFIELDS].copy()
        df['hospital_id'] = df['hospital_id'].astype(str).str.strip()
        df['home_zone'] = df['home_zone'].astype(str).str.strip()
        if (df['hospital_id'] == '').any() or (df['home_zone'] == '').any():
            raise RegionFlowException('Hospital roster has empty hospital_id or home_zone values.',
                                      code='malformed_record')
        dups = df['hospital_id'][df['hospital_id'].duplicated()].unique().tolist()
        if len(dups):
            raise RegionFlowException('Hospital ids must be unique: %s' % str(dups),
                                      code='malformed_record',details={'hospitals':dups})
        flags = df['is_general'].map(_parseBoolean)
        if flags.isnull().any():
            idx = int(np.flatnonzero(flags.isnull().values)[0])
            raise RegionFlowException('Roster row %i has an unreadable is_general value.' % idx,
                                      code='malformed_record',details={'index':idx})
        df['is_general'] = flags.astype(bool)
        admissions = pd.to_numeric(df['admissions'],errors='coerce')
        if admissions.isnull().any() or (admissions < 0).any():
            idx = int(np.flatnonzero((admissions.isnull() | (admissions < 0)).values)[0])
            raise RegionFlowException('Roster row %i has an invalid admissions value.' % idx,
                                      code='malformed_record',details={'index':idx})
        df['admissions'] = admissions.astype(np.int64)
        self._dataframe = df.sort_values('hospital_id').reset_index(drop=True)
        self._homezones = pd.Series(self._dataframe['home_zone'].values,
                                    index=self._dataframe['hospital_id'].values)

    @classmethod
    def loadFromCSV(cls,csvfile):
        """Load a roster from a CSV file with columns hospital_id,home_zone,is_general,admissions.

        :param csvfile:
          Path to roster CSV file.
        :returns:
          HospitalRoster instance.
        """
        df = pd.read_csv(csvfile,dtype=str,keep_default_na=False,comment='#')
        return cls(df)

    @classmethod
    def empty(cls):
        return cls(pd.DataFrame({key:[] for key in cls.REQFIELDS}))

    def getData(self,getCopy=False):
        if getCopy:
            return self._dataframe.copy()
        return self._dataframe

    def save(self,filename,comment=None):
        df = self._dataframe.copy()
        df['is_general'] = df['is_general'].map({True:'true',False:'false'})
        saveFrame(df,filename,comment=comment)

    def isEmpty(self):
        return len(self._dataframe) == 0

    def hasHospital(self,hospital_id):
        return hospital_id in self._homezones.index

    def getHomeZone(self,hospital_id):
        """Return the home zone of a hospital.

        :param hospital_id:
          Hospital identifier.
        :raises RegionFlowException:
          When the hospital is not in the roster.
        """
        if hospital_id not in self._homezones.index:
            raise RegionFlowException('Hospital "%s" is not in the hospital roster.' % hospital_id,
                                      code='missing_hospital',details={'hospital':hospital_id})
        return self._homezones[hospital_id]

    def getHomeZones(self):
        """Return a pandas Series mapping hospital_id to home zone.
        """
        return self._homezones

    def getGeneralHospitals(self):
        """Return the set of hospital ids flagged as general medical/surgical.
        """
        df = self._dataframe
        return set(df['hospital_id'][df['is_general']].tolist())

    def checkUniverse(self,universe):
        """Make sure every home zone belongs to the declared zone universe.

        :param universe:
          Set of zone ids.
        :raises RegionFlowException:
          When any home zone is outside the universe.
        """
        outside = sorted(set(self._dataframe['home_zone']) - set(universe))
        if len(outside):
            raise RegionFlowException('Hospital home zones outside the zone universe: %s' % str(outside),
                                      code='coverage_mismatch',details={'zones':outside})

class FlowTable(DataSet):
    """
    Aggregated patient-zone to hospital flows, one row per (patient_zone, hospital, service_class).
    """
    COLUMNS = ['patient_zone','hospital_zone','hospital_id','service_class','count']
    def __init__(self,dataframe,stats=None):
        """Construct a FlowTable from already aggregated rows.

        :param dataframe:
          pandas DataFrame with columns patient_zone, hospital_zone, hospital_id,
          service_class ('G' or 'S') and count (>= 1).
        :param stats:
          IngestStats describing how the rows were obtained, or None.
        """
        self.checkColumns(dataframe,self.COLUMNS,'Flow table')
        df = dataframe[self.COLUMNS].copy()
        df['count'] = df['count'].astype(np.int64)
        if (df['count'] < 1).any():
            raise RegionFlowException('Flow table counts must be at least 1.',code='malformed_record')
        if df.duplicated(['patient_zone','hospital_id','service_class']).any():
            raise RegionFlowException('Flow table has repeated (patient_zone,hospital_id,service_class) rows.',
                                      code='malformed_record')
        self._dataframe = df.sort_values(['patient_zone','hospital_id','service_class']).reset_index(drop=True)
        if stats is None:
            stats = IngestStats({'input_records':len(df),'retained_records':len(df),
                                 'input_admissions':int(df['count'].sum()),
                                 'retained_admissions':int(df['count'].sum())})
        self._stats = stats

    #"magic" methods
    def __repr__(self):
        return str(self._dataframe)

    @classmethod
    def loadFromCSV(cls,flowfile,roster=None,policy=None,universe=None,chunksize=None,workers=1):
        """Read and ingest a flow CSV file (patient_zone,hospital_id,count,service_class).

        :param flowfile:
          Path to UTF-8 flow CSV file with a header row.
        :param roster:
          HospitalRoster instance (may be None only if the policy needs no roster).
        :param policy:
          FilterPolicy instance, or None for defaults.
        :param universe:
          Set of declared zone ids, or None when no universe was declared.
        :param chunksize:
          Number of rows parsed per chunk, or None to read the file at once.
        :param workers:
          Number of threads screening chunks.
        :returns:
          FlowTable instance.
        :raises RegionFlowException:
          When the file is empty, lacks the header or holds a malformed record.
        """
        readargs = dict(dtype=str,keep_default_na=False,comment='#',encoding='utf-8')
        try:
            if chunksize is None:
                chunks = [pd.read_csv(flowfile,**readargs)]
            else:
                chunks = list(pd.read_csv(flowfile,chunksize=chunksize,**readargs))
        except pd.errors.EmptyDataError:
            raise RegionFlowException('Flow file %s is empty.' % flowfile,code='empty_input')
        if not len(chunks):
            chunks = [pd.read_csv(flowfile,nrows=0,**readargs)]
        logger.info('Read %i flow chunk(s) from %s' % (len(chunks),flowfile))
        return ingestFlows(chunks,roster=roster,policy=policy,universe=universe,workers=workers)

    def getData(self,getCopy=False):
        if getCopy:
            return self._dataframe.copy()
        return self._dataframe

    def getStats(self):
        return self._stats

    def save(self,filename,comment=None):
        saveFrame(self._dataframe,filename,comment=comment)

    def isEmpty(self):
        return len(self._dataframe) == 0

    def getTotal(self):
        """Return the total number of admissions in the table.
        """
        return int(self._dataframe['count'].sum())

    def getZones(self):
        """Return the sorted list of patient and hospital zones in the table.
        """
        df = self._dataframe
        zones = set(df['patient_zone']) | set(df['hospital_zone'])
        zones.discard('')
        return sorted(zones)

    def getZoneFlows(self):
        """Return admissions summed over hospitals and service classes.

        :returns:
          pandas DataFrame with columns patient_zone, hospital_zone, count.
        """
        grouped = self._dataframe.groupby(['patient_zone','hospital_zone'],sort=True)['count'].sum()
        return grouped.reset_index()

    def getHospitalTotals(self):
        """Return a pandas Series of admissions per hospital id.
        """
        return self._dataframe.groupby('hospital_id',sort=True)['count'].sum()

    def filterSpecialized(self):
        """Return a new FlowTable holding only specialized-care rows.
        """
        return filterSpecialized(self)

def filterSpecialized(table):
    """Keep only the specialized-care (cardiovascular surgery / neurosurgery) rows of a table.

    :param table:
      FlowTable instance.
    :returns:
      New FlowTable with service_class 'S' rows, counts unchanged. The
      ingestion statistics of the input table are carried along.
    """
    df = table.getData()
    subset = df[df['service_class'] == SPECIALIZED]
    return FlowTable(subset,stats=table.getStats())

def _recordsToFrame(records):
    if isinstance(records,pd.DataFrame):
        return [records]
    records = list(records)
    if not len(records):
        return [pd.DataFrame({key:pd.Series([],dtype=object) for key in FlowRecord._fields})]
    if isinstance(records[0],pd.DataFrame):
        return records
    df = pd.DataFrame.from_records([tuple(r) for r in records],columns=list(FlowRecord._fields))
    return [df]

def _screenChunk(args):
    """Validate one chunk of raw records and split it into retained rows and exclusion counts.
    """
    chunk,offset,homezones,general,policy,universe = args
    if 'hospital_id' not in chunk.columns and 'hospital' in chunk.columns:
        chunk = chunk.rename(columns={'hospital':'hospital_id'})
    DataSet.checkColumns(chunk,list(FlowRecord._fields),'Flow file')
    nrows = len(chunk)
    pzone = chunk['patient_zone'].fillna('').astype(str).str.strip().values
    hosp = chunk['hospital_id'].fillna('').astype(str).str.strip().values
    service = chunk['service_class'].fillna('').astype(str).str.strip().str.upper().map(SERVICE_ALIASES)
    counts = pd.to_numeric(chunk['count'],errors='coerce').values.astype(float)

    bad = np.isnan(counts) | (counts < 1) | (np.floor(counts) != counts)
    bad |= service.isnull().values
    bad |= (hosp == '')
    if bad.any():
        idx = offset + int(np.flatnonzero(bad)[0])
        raise RegionFlowException('Malformed flow record at index %i.' % idx,
                                  code='malformed_record',details={'index':idx})
    counts = counts.astype(np.int64)
    service = service.values

    excluded = np.zeros(nrows,dtype=bool)
    stats = OrderedDict()
    matched = np.array([h in homezones for h in hosp],dtype=bool)
    masks = OrderedDict()
    masks['unmatched_hospital'] = policy.require_roster_match & ~matched
    masks['missing_zone'] = policy.drop_missing_zone & (pzone == '')
    if policy.general_hospitals_only:
        isgeneral = np.array([h in general for h in hosp],dtype=bool)
        masks['non_general_hospital'] = matched & ~isgeneral
    else:
        masks['non_general_hospital'] = np.zeros(nrows,dtype=bool)
    if policy.in_universe_only and universe is not None:
        masks['out_of_universe'] = ~np.array([z in universe for z in pzone],dtype=bool)
    else:
        masks['out_of_universe'] = np.zeros(nrows,dtype=bool)
    for reason in REASONS:
        hit = masks[reason] & ~excluded
        stats[reason] = int(hit.sum())
        excluded |= hit

    keep = ~excluded
    hzone = np.array([homezones[h] if m else '' for h,m in zip(hosp,matched)],dtype=object)
    retained = pd.DataFrame({'patient_zone':pzone[keep],
                             'hospital_zone':hzone[keep],
                             'hospital_id':hosp[keep],
                             'service_class':service[keep],
                             'count':counts[keep]})
    stats['input_records'] = nrows
    stats['retained_records'] = int(keep.sum())
    stats['input_admissions'] = int(counts.sum())
    stats['retained_admissions'] = int(counts[keep].sum())
    return retained,IngestStats(stats)

def ingestFlows(records,roster=None,policy=None,universe=None,workers=1):
    """Filter and aggregate raw flow records into a FlowTable.

    Each record is screened against the filter policy; a record failing
    several tests is charged to the first reason in REASONS. Retained records
    are summed by (patient_zone, hospital_id, service_class).

    :param records:
      pandas DataFrame, list of DataFrame chunks, or iterable of FlowRecord
      tuples (patient_zone, hospital_id, count, service_class).
    :param roster:
      HospitalRoster instance, or None.
    :param policy:
      FilterPolicy instance, or None for the default (all filters on).
    :param universe:
      Set of declared zone ids, or None.
    :param workers:
      Number of threads used to screen chunks. Output does not depend on it.
    :returns:
      FlowTable instance.
    :raises RegionFlowException:
      On a malformed record (details carry the record index), or when a
      roster-dependent filter is on but the roster is empty.
    """
    if policy is None:
        policy = FilterPolicy()
    if roster is None:
        roster = HospitalRoster.empty()
    if policy.requiresRoster() and roster.isEmpty():
        raise RegionFlowException('The filter policy needs a hospital roster, but the roster is empty.',
                                  code='config')
    if universe is not None:
        universe = set(universe)
    chunks = _recordsToFrame(records)
    homezones = roster.getHomeZones().to_dict()
    general = roster.getGeneralHospitals()
    jobs = []
    offset = 0
    for chunk in chunks:
        jobs.append((chunk,offset,homezones,general,policy,universe))
        offset += len(chunk)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_screenChunk,jobs))
    else:
        results = [_screenChunk(job) for job in jobs]

    stats = IngestStats()
    frames = []
    for retained,chunkstats in results:
        stats = stats + chunkstats
        frames.append(retained)
    df = pd.concat(frames,ignore_index=True)
    keys = ['patient_zone','hospital_zone','hospital_id','service_class']
    if len(df):
        df = df.groupby(keys,sort=True)['count'].sum().reset_index()
    else:
        df = pd.DataFrame({key:pd.Series([],dtype=object) for key in keys})
        df['count'] = pd.Series([],dtype=np.int64)
    logger.info('Ingested %i of %i flow records (%i excluded)' %
                (stats['retained_records'],stats['input_records'],stats.getExcluded()))
    return FlowTable(df,stats=stats)
