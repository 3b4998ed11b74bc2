#!/usr/bin/env python

#stdlib imports
from collections import OrderedDict
import json
import logging
import os.path

#third party imports
import numpy as np
import pandas as pd
from sklearn.metrics import adjusted_rand_score

#local imports
from .dataset import RegionFlowException,saveFrame
from .geometry import compactness,dissolve

HHI_SCALE = 10000
#lower bounds of the market classes, checked from the top
HHI_CLASSES = [(2500,'highly_concentrated',False),
               (1500,'moderately_concentrated',True),
               (100,'unconcentrated',True),
               (0,'highly_competitive',True)]

INDEX_COLUMNS = ['LI','MSI','NPF','PAC','HHI']
SIZE_COLUMNS = ['zone_count','hospital_count','inpatient_count','resident_count','population']

logger = logging.getLogger(__name__)

def _hospitalZones(table,roster):
    df = table.getData()
    if roster is None:
        return df['hospital_zone']
    homezones = roster.getHomeZones().to_dict()
    missing = sorted(set(df['hospital_id']) - set(homezones))
    if len(missing):
        raise RegionFlowException('Hospital "%s" is missing from the hospital roster.' % missing[0],
                                  code='missing_hospital',details={'hospitals':missing})
    return df['hospital_id'].map(homezones)

def flowAccounts(table,p,roster=None):
    """Return the per-region admission counts all flow indices derive from.

    :param table:
      FlowTable instance.
    :param p:
      Zone-level Partition covering every patient and hospital zone of the table.
    :param roster:
      Optional HospitalRoster (hospital home zones); the table's hospital_zone otherwise.
    :returns:
      pandas DataFrame indexed by region_id with integer columns resident
      (admissions of residents), internal (residents treated inside),
      outflow (residents treated outside), hospital_admissions (admissions at
      region hospitals) and inflow (nonresidents treated inside).
    :raises RegionFlowException:
      When a table zone is absent from the partition.
    """
    df = table.getData()
    ncomm = p.getCommunityCount()
    counts = df['count'].values.astype(np.int64)
    preg = p.getLabelsFor(df['patient_zone'].tolist())
    hreg = p.getLabelsFor(_hospitalZones(table,roster).tolist())
    resident = np.zeros(ncomm,dtype=np.int64)
    hospital = np.zeros(ncomm,dtype=np.int64)
    internal = np.zeros(ncomm,dtype=np.int64)
    np.add.at(resident,preg,counts)
    np.add.at(hospital,hreg,counts)
    inside = preg == hreg
    np.add.at(internal,preg[inside],counts[inside])
    accounts = pd.DataFrame({'resident':resident,
                             'internal':internal,
                             'outflow':resident - internal,
                             'hospital_admissions':hospital,
                             'inflow':hospital - internal},
                            index=pd.Index(np.arange(ncomm),name='region_id'))
    return accounts

def _ratio(numerator,denominator):
    with np.errstate(divide='ignore',invalid='ignore'):
        values = numerator.astype(float)/denominator.astype(float)
    values[denominator == 0] = np.nan
    return values

def localizationIndex(table,p,roster=None):
    """Share of each region's resident admissions treated at region hospitals.

    :returns:
      pandas Series indexed by region_id; NaN where a region has no resident admissions.
    """
    acc = flowAccounts(table,p,roster)
    return pd.Series(_ratio(acc['internal'].values,acc['resident'].values),index=acc.index,name='LI')

def marketShareIndex(table,p,roster=None):
    """Share of each region's hospital admissions coming from nonresidents.

    :returns:
      pandas Series indexed by region_id; NaN where region hospitals have no admissions.
    """
    acc = flowAccounts(table,p,roster)
    return pd.Series(_ratio(acc['inflow'].values,acc['hospital_admissions'].values),index=acc.index,name='MSI')

def _npf(inflow,outflow):
    values = _ratio(inflow,outflow)
    values[(outflow == 0) & (inflow > 0)] = np.inf
    return values

def netPatientFlow(table,p,roster=None):
    """Ratio of incoming to outgoing admissions per region.

    :returns:
      pandas Series indexed by region_id; +inf when only inflow exists, NaN for 0/0.
    """
    acc = flowAccounts(table,p,roster)
    return pd.Series(_npf(acc['inflow'].values,acc['outflow'].values),index=acc.index,name='NPF')

def hhiClass(value):
    """Return the market class of an HHI value (None when undefined).
    """
    if value is None or np.isnan(value):
        return None
    for bound,name,inclusive in HHI_CLASSES:
        if value > bound or (inclusive and value == bound):
            return name
    return HHI_CLASSES[-1][1]

def _hospitalRegions(table,p,roster):
    df = table.getData()
    totals = df.groupby('hospital_id',sort=True)['count'].sum()
    hzones = pd.Series(_hospitalZones(table,roster).values,index=df['hospital_id'].values)
    hzones = hzones[~hzones.index.duplicated()]
    regions = p.getLabelsFor(hzones.reindex(totals.index).tolist())
    return totals,regions

def herfindahl(table,roster,p):
    """Herfindahl-Hirschman index of hospital market shares within each region.

    A hospital's share is its fraction of all admissions at hospitals located
    in the region; HHI = 10000 * sum of squared shares.

    :param table:
      FlowTable instance.
    :param roster:
      HospitalRoster mapping hospitals to home zones (None uses the table's hospital_zone).
    :param p:
      Zone-level Partition.
    :returns:
      pandas DataFrame indexed by region_id with columns HHI (NaN for regions
      without hospitals), HHI_class and hospital_count.
    """
    ncomm = p.getCommunityCount()
    totals,regions = _hospitalRegions(table,p,roster)
    sumsq = [0]*ncomm
    total = [0]*ncomm
    nhosp = [0]*ncomm
    for count,region in zip(totals.values,regions):
        count = int(count)
        sumsq[region] += count*count
        total[region] += count
        nhosp[region] += 1
    hhi = np.full(ncomm,np.nan)
    for region in range(ncomm):
        if total[region] > 0:
            #integer arithmetic keeps 10000/n exact for n equal hospitals
            hhi[region] = (HHI_SCALE*sumsq[region])/(total[region]*total[region])
    return pd.DataFrame({'HHI':hhi,
                         'HHI_class':[hhiClass(v) for v in hhi],
                         'hospital_count':np.array(nhosp,dtype=np.int64)},
                        index=pd.Index(np.arange(ncomm),name='region_id'))

def summarize(frame,columns=None):
    """Summary statistics (mean, population standard deviation, min, max) per column.

    Values that are NaN or infinite are excluded and counted.

    :param frame:
      pandas DataFrame of per-region values.
    :param columns:
      Columns to summarize (default all numeric columns).
    :returns:
      OrderedDict of column -> OrderedDict(mean,std,min,max,n,excluded).
    """
    if columns is None:
        columns = [c for c in frame.columns if pd.api.types.is_numeric_dtype(frame[c])]
    summary = OrderedDict()
    for col in columns:
        values = frame[col].values.astype(float)
        finite = values[np.isfinite(values)]
        stats = OrderedDict()
        if len(finite):
            stats['mean'] = float(finite.mean())
            stats['std'] = float(finite.std(ddof=0))
            stats['min'] = float(finite.min())
            stats['max'] = float(finite.max())
        else:
            stats['mean'] = stats['std'] = stats['min'] = stats['max'] = float('nan')
        stats['n'] = int(len(finite))
        stats['excluded'] = int(len(values) - len(finite))
        summary[col] = stats
    return summary

def sizeBalance(p,attrs,roster,table):
    """Count zones, hospitals, patients and population per region.

    :param p:
      Zone-level Partition.
    :param attrs:
      ZoneAttributes covering every zone of p, or None to leave out population.
    :param roster:
      HospitalRoster (None uses the table's hospital_zone).
    :param table:
      FlowTable instance.
    :returns:
      Tuple of (per-region DataFrame with columns zone_count, hospital_count,
      inpatient_count (admissions at region hospitals), resident_count
      (admissions of region residents), population; summary OrderedDict).
    :raises RegionFlowException:
      When attribute rows are missing for partition zones.
    """
    zones = p.getNodes()
    ncomm = p.getCommunityCount()
    labels = p.getLabelsFor(zones)
    acc = flowAccounts(table,p,roster)
    hhi = herfindahl(table,roster,p)
    frame = pd.DataFrame({'zone_count':np.bincount(labels,minlength=ncomm).astype(np.int64),
                          'hospital_count':hhi['hospital_count'].values,
                          'inpatient_count':acc['hospital_admissions'].values,
                          'resident_count':acc['resident'].values},
                         index=pd.Index(np.arange(ncomm),name='region_id'))
    if attrs is not None:
        attrs.checkCoverage(zones)
        population = attrs.getPopulation().reindex(zones).values.astype(float)
        frame['population'] = np.bincount(labels,weights=population,minlength=ncomm)
    return frame,summarize(frame,[c for c in SIZE_COLUMNS if c in frame.columns])

def _jsonValue(value):
    if value is None:
        return None
    if isinstance(value,(bool,np.bool_)):
        return bool(value)
    if isinstance(value,(int,np.integer)):
        return int(value)
    if isinstance(value,(float,np.floating)):
        if np.isnan(value):
            return None
        if np.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return float(value)
    return value

class RegionReport(object):
    """
    Per-region evaluation indices with their summary statistics.
    """
    def __init__(self,regions,skipped=None):
        """
        :param regions:
          pandas DataFrame indexed by region_id holding the index columns
          (LI, MSI, NPF, PAC, HHI), HHI_class, the size columns and the flow
          counts internal, inflow, outflow.
        :param skipped:
          List of indices that could not be computed (i.e. ['PAC'] without geometry).
        """
        self._regions = regions
        self._skipped = list(skipped) if skipped is not None else []

    def __len__(self):
        return len(self._regions)

    def getRegions(self):
        return self._regions.copy()

    def getSkipped(self):
        return list(self._skipped)

    def getSummary(self):
        """Return summary statistics of every index and size measure present.
        """
        columns = [c for c in INDEX_COLUMNS + SIZE_COLUMNS if c in self._regions.columns]
        return summarize(self._regions,columns)

    def getClassCounts(self):
        """Return the number of regions in each HHI market class.
        """
        counts = OrderedDict([(name,0) for bound,name,inclusive in HHI_CLASSES])
        for name in self._regions['HHI_class']:
            if name is not None:
                counts[name] += 1
        return counts

    def getSummaryTable(self):
        """Return the summary as a DataFrame with one row per measure.
        """
        summary = self.getSummary()
        rows = []
        for measure,stats in summary.items():
            row = OrderedDict([('measure',measure)])
            row.update(stats)
            rows.append(row)
        return pd.DataFrame(rows,columns=['measure','mean','std','min','max','n','excluded'])

    def asDict(self,metadata=None):
        regions = []
        for region_id,row in self._regions.iterrows():
            entry = OrderedDict([('region_id',int(region_id))])
            for col,value in row.items():
                entry[col] = _jsonValue(value)
            regions.append(entry)
        summary = OrderedDict()
        for measure,stats in self.getSummary().items():
            summary[measure] = OrderedDict([(k,_jsonValue(v)) for k,v in stats.items()])
        for measure in self._skipped:
            summary[measure] = 'skipped'
        mydict = OrderedDict()
        mydict['region_count'] = len(self._regions)
        mydict['regions'] = regions
        mydict['summary'] = summary
        mydict['hhi_classes'] = self.getClassCounts()
        mydict['skipped'] = self.getSkipped()
        mydict['metadata'] = metadata if metadata is not None else {}
        return mydict

    def save(self,filename,format='csv',metadata=None,comment=None):
        """Write the per-region report as JSON (regions plus summary) or flat CSV.

        In CSV output undefined values are blank, infinite NPF is 'inf' and
        skipped indices are columns holding the word 'skipped'.
        """
        if format == 'json':
            with open(filename,'wt') as f:
                f.write(json.dumps(self.asDict(metadata),sort_keys=True,indent=1) + '\n')
        elif format == 'csv':
            frame = self._regions.reset_index()
            for measure in self._skipped:
                frame[measure] = 'skipped'
            saveFrame(frame,filename,comment=comment)
        else:
            raise RegionFlowException('Unsupported report format "%s".' % format,code='config')

def evaluate(table,p,roster=None,geoms=None,attrs=None):
    """Compute every evaluation index for a partition.

    :param table:
      FlowTable instance.
    :param p:
      Zone-level Partition covering every zone of the table.
    :param roster:
      HospitalRoster (None uses the table's hospital_zone).
    :param geoms:
      ZoneGeometry or None; without it PAC is reported as skipped.
    :param attrs:
      ZoneAttributes or None; without it population is reported as skipped.
    :returns:
      RegionReport instance.
    :raises RegionFlowException:
      When inputs do not cover the partition's zones.
    """
    if table.isEmpty():
        raise RegionFlowException('Cannot evaluate a partition on an empty flow table.',code='empty_input')
    ncomm = p.getCommunityCount()
    index = pd.Index(np.arange(ncomm),name='region_id')
    acc = flowAccounts(table,p,roster)
    hhi = herfindahl(table,roster,p)
    frame = pd.DataFrame(index=index)
    frame['LI'] = _ratio(acc['internal'].values,acc['resident'].values)
    frame['MSI'] = _ratio(acc['inflow'].values,acc['hospital_admissions'].values)
    frame['NPF'] = _npf(acc['inflow'].values,acc['outflow'].values)
    skipped = []
    if geoms is not None:
        shapes = dissolve(geoms,p)
        frame['PAC'] = [compactness(P,A) for P,A in zip(shapes['perimeter'],shapes['area'])]
        frame['perimeter'] = shapes['perimeter'].values
        frame['area'] = shapes['area'].values
    else:
        skipped.append('PAC')
    frame['HHI'] = hhi['HHI'].values
    frame['HHI_class'] = hhi['HHI_class'].values
    sizes = sizeBalance(p,attrs,roster,table)[0]
    for col in sizes.columns:
        frame[col] = sizes[col].values
    if attrs is None:
        skipped.append('population')
    frame['internal'] = acc['internal'].values
    frame['inflow'] = acc['inflow'].values
    frame['outflow'] = acc['outflow'].values
    report = RegionReport(frame,skipped=skipped)
    logger.info('Evaluated %i regions (skipped: %s)' % (ncomm,','.join(skipped) or 'none'))
    return report

def partitionAgreement(first,second):
    """Adjusted Rand index between two partitions over their common zones.

    :raises RegionFlowException:
      When the partitions share no zones.
    """
    common = sorted(set(first.getNodes()) & set(second.getNodes()))
    if not len(common):
        raise RegionFlowException('The partitions share no zones.',code='coverage_mismatch')
    return float(adjusted_rand_score(first.getLabelsFor(common),second.getLabelsFor(common)))

class PartitionComparison(object):
    """Side-by-side evaluation of several partitions of the same flows.
    """
    def __init__(self,names,reports,ari):
        """
        :param names:
          List of partition names, in input order.
        :param reports:
          List of RegionReport objects, one per name.
        :param ari:
          Square pandas DataFrame of pairwise adjusted Rand indices, indexed
          and labelled by name.
        """
        self.names = list(names)
        self.reports = OrderedDict(zip(self.names,reports))
        self.ari = ari

    def getAgreement(self,first,second):
        """Return the adjusted Rand index between two named partitions.
        """
        for name in (first,second):
            if name not in self.reports:
                raise RegionFlowException('No partition named "%s" in the comparison.' % name,code='config')
        return float(self.ari.loc[first,second])

    def getAgreementTable(self):
        """Return a DataFrame with one (first,second,adjusted_rand_index) row per pair.
        """
        rows = [(a,b,float(self.ari.loc[a,b])) for i,a in enumerate(self.names) for b in self.names[i+1:]]
        return pd.DataFrame(rows,columns=['first','second','adjusted_rand_index'])

    def getTable(self):
        """Return a DataFrame of (measure,statistic) rows with one column per partition.
        """
        rows = OrderedDict()
        for name,report in self.reports.items():
            for measure,stats in report.getSummary().items():
                for stat,value in stats.items():
                    rows.setdefault((measure,stat),OrderedDict())[name] = value
        frame = pd.DataFrame([[rows[key].get(name,np.nan) for name in self.names] for key in rows],
                             columns=self.names)
        frame.insert(0,'statistic',[key[1] for key in rows])
        frame.insert(0,'measure',[key[0] for key in rows])
        return frame

    def asDict(self,metadata=None):
        mydict = OrderedDict()
        mydict['partitions'] = self.names
        mydict['adjusted_rand_index'] = OrderedDict([(a,OrderedDict([(b,float(self.ari.loc[a,b]))
                                                                    for b in self.names]))
                                                     for a in self.names])
        mydict['region_counts'] = OrderedDict([(n,len(r)) for n,r in self.reports.items()])
        mydict['summaries'] = OrderedDict([(n,r.asDict()['summary']) for n,r in self.reports.items()])
        mydict['metadata'] = metadata if metadata is not None else {}
        return mydict

    def save(self,filename,format='csv',metadata=None,comment=None):
        """Write the comparison as JSON, or as CSV with the pairwise agreement
        in a second file named after the first (comparison.csv gives
        comparison_agreement.csv).

        :returns:
          List of files written.
        """
        if format == 'json':
            with open(filename,'wt') as f:
                f.write(json.dumps(self.asDict(metadata),sort_keys=True,indent=1) + '\n')
            return [filename]
        elif format == 'csv':
            saveFrame(self.getTable(),filename,comment=comment)
            root,ext = os.path.splitext(filename)
            agreefile = root + '_agreement' + ext
            saveFrame(self.getAgreementTable(),agreefile,comment=comment)
            return [filename,agreefile]
        else:
            raise RegionFlowException('Unsupported comparison format "%s".' % format,code='config')

def comparePartitions(table,partitions,roster=None,geoms=None,attrs=None,names=None):
    """Evaluate two or more partitions of the same table and report their pairwise agreement.

    :param table:
      FlowTable instance.
    :param partitions:
      Sequence of at least two zone-level Partitions.
    :param roster:
      HospitalRoster (None uses the table's hospital_zone).
    :param geoms:
      ZoneGeometry or None.
    :param attrs:
      ZoneAttributes or None.
    :param names:
      Distinct names, one per partition; defaults to partition1, partition2, ...
    :returns:
      PartitionComparison instance.
    :raises RegionFlowException:
      When fewer than two partitions are given or the names do not match them.
    """
    partitions = list(partitions)
    if len(partitions) < 2:
        raise RegionFlowException('A comparison needs at least two partitions, got %i.' % len(partitions),
                                  code='config')
    if names is None:
        names = ['partition%i' % (i+1) for i in range(len(partitions))]
    names = list(names)
    if len(names) != len(partitions) or len(set(names)) != len(names):
        raise RegionFlowException('Comparison names must be distinct, one per partition.',
                                  code='config',details={'names':names})
    reports = [evaluate(table,p,roster=roster,geoms=geoms,attrs=attrs) for p in partitions]
    ari = pd.DataFrame(np.eye(len(names)),index=names,columns=names)
    for i in range(len(names)):
        for j in range(i+1,len(names)):
            ari.iloc[i,j] = ari.iloc[j,i] = partitionAgreement(partitions[i],partitions[j])
            logger.info('Agreement of %s and %s (adjusted Rand index): %.6f' %
                        (names[i],names[j],ari.iloc[i,j]))
    return PartitionComparison(names,reports,ari)
