#!/usr/bin/env python

#stdlib imports
import argparse
from collections import OrderedDict
import json
import logging
import os
import os.path
import sys

#third party imports
import pandas as pd

#local imports
from .config import RunConfig,setupLogging,teardownLogging
from .dartmouth import AdjacencyMap,BaselineFlags,enforceContiguity,pluralityAssign
from .dataset import RegionFlowException,saveFrame
from .flows import FlowTable,HospitalRoster
from .geometry import BlockPoints,ZoneAttributes,ZoneGeometry,zoneAdjacency
from .louvain import Dendrogram,Partition,runLouvain
from .metrics import comparePartitions,evaluate
from .network import buildNetwork
from .scale import cutToK,modularityCurve
from .synth import PlantedSpec,generatePlanted

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

logger = logging.getLogger(__name__)

def _require(config,*names):
    missing = [name for name in names if config.getPath(name) is None]
    if len(missing):
        code = 'missing_adjacency' if 'adjacency' in missing else 'config'
        raise RegionFlowException('Command %s needs --%s.' % (config.command,' and --'.join(missing)),
                                  code=code,details={'missing':missing})

def _output(config,name):
    return os.path.join(config.out,name)

def _loadAttributes(config):
    if config.getPath('attrs') is None:
        return None
    attrs = ZoneAttributes.loadFromCSV(config.getPath('attrs'))
    if config.getPath('blocks') is not None or config.getPath('geoms') is not None:
        blocks = BlockPoints.loadFromCSV(config.getPath('blocks')) if config.getPath('blocks') else None
        geoms = ZoneGeometry.loadFromGeoJSON(config.getPath('geoms')) if config.getPath('geoms') else None
        attrs,fallback = attrs.fillCentroids(blocks=blocks,geoms=geoms)
    return attrs

def _loadTable(config,attrs=None):
    """Ingest flows per the run configuration (filtered to specialized care if asked).
    """
    _require(config,'flows','roster')
    roster = HospitalRoster.loadFromCSV(config.getPath('roster'))
    universe = None
    if attrs is not None:
        universe = set(attrs.getZones())
        roster.checkUniverse(universe)
    table = FlowTable.loadFromCSV(config.getPath('flows'),roster=roster,universe=universe,
                                  chunksize=config.chunksize,workers=config.workers)
    table.getStats().save(_output(config,'ingest_stats.json'),metadata=config.getMetadata())
    if config.specialized:
        table = table.filterSpecialized()
        logger.info('Kept %i specialized-care flow rows' % len(table))
    if table.isEmpty():
        raise RegionFlowException('No flows remain after ingestion.',code='empty_input')
    return table,roster

def _dendrogram(config,net):
    if config.getPath('dendrogram') is not None:
        d = Dendrogram.load(config.getPath('dendrogram'))
        if d.getZones() != net.getNodes():
            missing = sorted(set(net.getNodes()) ^ set(d.getZones()))
            raise RegionFlowException('Dendrogram zones do not match the flow network.',
                                      code='coverage_mismatch',details={'zones':missing})
        return d
    return runLouvain(net,config.getLouvainOptions())

def cmdDetect(config):
    """Ingest flows, build the network and run Louvain; write the hierarchy.
    """
    attrs = _loadAttributes(config)
    table,roster = _loadTable(config,attrs)
    net = buildNetwork(table,roster)
    comment = config.getComment()
    net.save(_output(config,'network'),comment=comment)
    d = runLouvain(net,config.getLouvainOptions())
    metadata = config.getMetadata()
    d.save(_output(config,'dendrogram.json'),metadata=metadata)
    d.getFinalPartition().save(_output(config,'partition.csv'),comment=comment)
    levels = pd.DataFrame({'level':list(range(d.getLevelCount())),
                           'community_count':d.getCommunityCounts(),
                           'Q':[d.getModularity(i) for i in range(d.getLevelCount())]})
    if config.format == 'json':
        with open(_output(config,'levels.json'),'wt') as f:
            payload = OrderedDict([('levels',levels.to_dict(orient='records')),('metadata',metadata)])
            f.write(json.dumps(payload,sort_keys=True,indent=1) + '\n')
    else:
        saveFrame(levels,_output(config,'levels.csv'),comment=comment)
    for i in range(d.getLevelCount()):
        logger.info('Level %i: %i regions, Q = %.6f' % (i,d.getCommunityCounts()[i],d.getModularity(i)))

def _writeCurve(config,net,d):
    kmin = config.k_min if config.k_min is not None else 1
    kmax = config.k_max if config.k_max is not None else len(net)
    curve = modularityCurve(net,d,kmin,kmax)
    ext = 'json' if config.format == 'json' else 'csv'
    curve.save(_output(config,'curve.%s' % ext),format=config.format,
               metadata=config.getMetadata(),comment=config.getComment())
    best = curve.getCut(curve.getBestK())
    best.partition.save(_output(config,'partition_best.csv'),comment=config.getComment())
    logger.info('Best region count %i with Q = %.6f' % (best.k,best.q))
    return curve

def cmdCut(config):
    """Cut the hierarchy to exactly k regions, or scan a range of k.
    """
    attrs = _loadAttributes(config)
    table,roster = _loadTable(config,attrs)
    net = buildNetwork(table,roster)
    d = _dendrogram(config,net)
    if config.k is None:
        if config.k_min is None and config.k_max is None:
            raise RegionFlowException('Command cut needs --k or --k-min/--k-max.',code='config')
        _writeCurve(config,net,d)
        return
    cut = cutToK(net,d,config.k)
    cut.partition.save(_output(config,'partition_k%i.csv' % cut.k),comment=config.getComment())
    summary = cut.asDict()
    summary['metadata'] = config.getMetadata()
    with open(_output(config,'cut.json'),'wt') as f:
        f.write(json.dumps(summary,sort_keys=True,indent=1) + '\n')
    logger.info('Cut to k = %i (%s), Q = %.6f' % (cut.k,cut.provenance,cut.q))

def cmdCurve(config):
    """Trace modularity against region count over [k_min,k_max].
    """
    attrs = _loadAttributes(config)
    table,roster = _loadTable(config,attrs)
    net = buildNetwork(table,roster)
    d = _dendrogram(config,net)
    _writeCurve(config,net,d)

def cmdBaseline(config):
    """Plurality-rule assignment followed by contiguity repair.
    """
    if config.getPath('adjacency') is None and config.getPath('geoms') is None:
        raise RegionFlowException('Command baseline needs --adjacency or --geoms.',code='missing_adjacency')
    attrs = _loadAttributes(config)
    table,roster = _loadTable(config,attrs)
    flags = BaselineFlags()
    p,flags = pluralityAssign(table,roster,attrs=attrs,flags=flags)
    if config.getPath('adjacency') is not None:
        adj = AdjacencyMap.loadFromCSV(config.getPath('adjacency'),zones=p.getNodes())
    else:
        adj = zoneAdjacency(ZoneGeometry.loadFromGeoJSON(config.getPath('geoms')))
    p,flags = enforceContiguity(p,adj,table,roster=roster,flags=flags)
    p.save(_output(config,'baseline_partition.csv'),comment=config.getComment())
    flags.save(_output(config,'baseline_flags.json'),metadata=config.getMetadata())
    logger.info('Baseline has %i regions' % p.getCommunityCount())

def cmdEvaluate(config):
    """Evaluate one partition, or compare several side by side.
    """
    if not len(config.partitions):
        raise RegionFlowException('Command evaluate needs at least one --partition file.',code='config')
    attrs = _loadAttributes(config)
    table,roster = _loadTable(config,attrs)
    geoms = None
    if config.getPath('geoms') is not None:
        geoms = ZoneGeometry.loadFromGeoJSON(config.getPath('geoms'))
    partitions = [Partition.load(path) for path in config.partitions]
    ext = 'json' if config.format == 'json' else 'csv'
    metadata = config.getMetadata()
    comment = config.getComment()
    if len(partitions) == 1:
        report = evaluate(table,partitions[0],roster=roster,geoms=geoms,attrs=attrs)
        report.save(_output(config,'report.%s' % ext),format=config.format,metadata=metadata,comment=comment)
        saveFrame(report.getSummaryTable(),_output(config,'summary.csv'),comment=comment)
        return
    names = [os.path.splitext(os.path.basename(path))[0] for path in config.partitions]
    if len(set(names)) != len(names):
        names = None
    comparison = comparePartitions(table,partitions,roster=roster,geoms=geoms,attrs=attrs,names=names)
    comparison.save(_output(config,'comparison.%s' % ext),format=config.format,metadata=metadata,comment=comment)
    for name,report in comparison.reports.items():
        report.save(_output(config,'report_%s.%s' % (name,ext)),format=config.format,
                    metadata=metadata,comment=comment)

def cmdSynth(config):
    """Write a planted-region synthetic data set.
    """
    spec = PlantedSpec(seed=config.seed,**config.synth)
    data = generatePlanted(spec)
    data.save(config.out,comment=config.getComment(),metadata=config.getMetadata())

COMMANDS = OrderedDict([('detect',cmdDetect),
                        ('cut',cmdCut),
                        ('curve',cmdCurve),
                        ('baseline',cmdBaseline),
                        ('evaluate',cmdEvaluate),
                        ('synth',cmdSynth)])

def getParser():
    parser = argparse.ArgumentParser(prog='regionflow',
                                     description='Delineate hospital service regions from patient flows.')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True
    helps = {'detect':'Run Louvain community detection on a flow network.',
             'cut':'Cut the community hierarchy to exactly k regions (or scan a k range).',
             'curve':'Trace modularity against region count.',
             'baseline':'Build plurality-rule regions with contiguity repair.',
             'evaluate':'Evaluate one partition or compare several.',
             'synth':'Generate a planted-region synthetic data set.'}
    for name in COMMANDS:
        sub = subparsers.add_parser(name,help=helps[name])
        sub.add_argument('--out',default='.',help='Output directory (created if missing).')
        sub.add_argument('--seed',type=int,default=0,help='Seed for all randomness.')
        sub.add_argument('--format',choices=['csv','json'],default='csv',help='Format of tabular outputs.')
        if name == 'synth':
            sub.add_argument('--regions',type=int,default=5,help='Number of planted regions.')
            sub.add_argument('--zones',type=int,default=10,help='Zones per region.')
            sub.add_argument('--lam',type=float,default=40.0,help='Mean admissions per zone.')
            sub.add_argument('--leakage',type=float,default=0.1,help='Probability of leaving the home region.')
            sub.add_argument('--hospitals',type=int,default=2,help='Hospitals per region.')
            sub.add_argument('--specialized-share',type=float,default=0.0,
                             help='Share of admissions flagged as specialized care.')
            continue
        sub.add_argument('--flows',help='Flow CSV (patient_zone,hospital_id,count,service_class).')
        sub.add_argument('--roster',help='Hospital roster CSV (hospital_id,home_zone,is_general,admissions).')
        sub.add_argument('--attrs',help='Zone attribute CSV (zone_id,population[,centroid_x,centroid_y]).')
        sub.add_argument('--geoms',help='Zone geometry GeoJSON (feature property zone_id).')
        sub.add_argument('--blocks',help='Block point CSV (zone_id,x,y,population) for weighted centroids.')
        sub.add_argument('--specialized',action='store_true',default=False,
                         help='Use only specialized-care flows (referral regions).')
        sub.add_argument('--workers',type=int,default=1,help='Threads used to screen flow chunks.')
        sub.add_argument('--chunksize',type=int,default=None,help='Flow rows parsed per chunk.')
        if name in ('detect','cut','curve'):
            sub.add_argument('--order',choices=['sorted','shuffle'],default='sorted',help='Node visit order.')
            sub.add_argument('--min-gain',type=float,default=1e-9,help='Minimum modularity gain per level.')
            sub.add_argument('--max-levels',type=int,default=None,help='Maximum number of levels.')
        if name in ('cut','curve'):
            sub.add_argument('--dendrogram',help='Dendrogram JSON from a previous detect run.')
            sub.add_argument('--k-min',type=int,default=None,help='Smallest region count to scan.')
            sub.add_argument('--k-max',type=int,default=None,help='Largest region count to scan.')
        if name == 'cut':
            sub.add_argument('--k',type=int,default=None,help='Exact number of regions.')
        if name == 'baseline':
            sub.add_argument('--adjacency',help='Adjacency CSV (zone_a,zone_b).')
        if name == 'evaluate':
            sub.add_argument('--partition',action='append',default=[],
                             help='Partition CSV (zone_id,region_id); repeat to compare several.')
    return parser

def _configFromArgs(args):
    get = lambda name,default=None: getattr(args,name,default)
    synth = None
    if args.command == 'synth':
        synth = OrderedDict([('regions',args.regions),('zones',args.zones),('lam',args.lam),
                             ('leakage',args.leakage),('hospitals',args.hospitals),
                             ('specialized',args.specialized_share)])
    paths = dict([(name,get(name)) for name in ['flows','roster','attrs','geoms','adjacency','blocks','dendrogram']])
    return RunConfig(args.command,out=args.out,seed=args.seed,order=get('order','sorted'),
                     min_gain=get('min_gain',1e-9),max_levels=get('max_levels'),k=get('k'),
                     k_min=get('k_min'),k_max=get('k_max'),specialized=get('specialized',False),
                     format=args.format,partitions=get('partition',[]),workers=get('workers',1),
                     chunksize=get('chunksize'),synth=synth,**paths)

def _reportError(error,outdir):
    payload = OrderedDict([('error',error.code),('message',str(error.value)),('details',error.details)])
    text = json.dumps(payload,sort_keys=True,default=str)
    sys.stderr.write(text + '\n')
    if os.path.isdir(outdir):
        with open(os.path.join(outdir,'error.json'),'wt') as f:
            f.write(text + '\n')

def main(argv=None):
    """Run a regionflow command.

    :param argv:
      Argument list (defaults to sys.argv[1:]).
    :returns:
      Exit code: 0 on success, 2 on input or configuration errors, 1 on internal failures.
    """
    parser = getParser()
    args = parser.parse_args(argv)
    handlers = []
    try:
        os.makedirs(args.out,exist_ok=True)
        handlers = setupLogging(os.path.join(args.out,'run.log'))
        config = _configFromArgs(args)
        config.validate()
        logger.info('Running %s (seed %i, config %s)' % (config.command,config.seed,config.getHash()))
        COMMANDS[config.command](config)
        return EXIT_OK
    except RegionFlowException as error:
        logger.error('%s: %s' % (error.code,str(error.value)))
        _reportError(error,args.out)
        return EXIT_INPUT
    except Exception:
        logger.exception('Internal failure')
        return EXIT_INTERNAL
    finally:
        teardownLogging(handlers)

if __name__ == '__main__':
    sys.exit(main())
