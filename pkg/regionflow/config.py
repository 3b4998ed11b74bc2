#!/usr/bin/env python

#stdlib imports
from collections import OrderedDict
import hashlib
import json
import logging
import os.path
import sys

#local imports
from . import __version__
from .dataset import RegionFlowException
from .louvain import LouvainOptions,ORDER_SORTED,ORDER_SHUFFLE

LOG_ENV = 'REGIONFLOW_LOG'
LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
FORMATS = ['csv','json']
PATH_FIELDS = ['flows','roster','attrs','geoms','adjacency','blocks','dendrogram']

def _fileHash(filename):
    digest = hashlib.sha256()
    with open(filename,'rb') as f:
        for block in iter(lambda: f.read(1 << 20),b''):
            digest.update(block)
    return digest.hexdigest()

class RunConfig(object):
    """
    Input paths and options of one command line run.
    """
    def __init__(self,command,out='.',seed=0,order=ORDER_SORTED,min_gain=1e-9,max_levels=None,
                 k=None,k_min=None,k_max=None,specialized=False,format='csv',
                 partitions=None,workers=1,chunksize=None,synth=None,**paths):
        """
        :param command:
          Subcommand name (detect, cut, curve, baseline, evaluate, synth).
        :param out:
          Output directory.
        :param paths:
          Input files keyed by flows, roster, attrs, geoms, adjacency, blocks, dendrogram.
        :param synth:
          Dictionary of PlantedSpec fields for the synth command.
        """
        unknown = set(paths) - set(PATH_FIELDS)
        if len(unknown):
            raise RegionFlowException('Unknown input(s): %s' % str(sorted(unknown)),code='config')
        self.command = command
        self.out = out
        self.seed = seed
        self.order = order
        self.min_gain = min_gain
        self.max_levels = max_levels
        self.k = k
        self.k_min = k_min
        self.k_max = k_max
        self.specialized = bool(specialized)
        self.format = format
        self.partitions = list(partitions) if partitions is not None else []
        self.workers = workers
        self.chunksize = chunksize
        self.synth = synth
        self.paths = OrderedDict([(name,paths.get(name)) for name in PATH_FIELDS])

    def getPath(self,name):
        return self.paths[name]

    def validate(self):
        """Check that options are consistent and every referenced file exists.

        :raises RegionFlowException:
          With code 'config' for bad options, 'missing_file' for absent inputs.
        """
        if self.order not in (ORDER_SORTED,ORDER_SHUFFLE):
            raise RegionFlowException('Unknown node order "%s".' % self.order,code='config')
        if self.format not in FORMATS:
            raise RegionFlowException('Unknown output format "%s".' % self.format,code='config')
        if self.seed is None or int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise RegionFlowException('The seed must be an integer in [0,2^64).',code='config')
        if self.workers < 1:
            raise RegionFlowException('workers must be at least 1.',code='config')
        missing = [path for path in list(self.paths.values()) + self.partitions
                   if path is not None and not os.path.isfile(path)]
        if len(missing):
            raise RegionFlowException('Input file(s) not found: %s' % ', '.join(missing),
                                      code='missing_file',details={'files':missing})

    def getOptions(self):
        """Return the options that determine the outputs (no paths).
        """
        options = OrderedDict()
        options['command'] = self.command
        options['seed'] = int(self.seed)
        options['order'] = self.order
        options['min_gain'] = float(self.min_gain)
        options['max_levels'] = self.max_levels
        options['k'] = self.k
        options['k_min'] = self.k_min
        options['k_max'] = self.k_max
        options['specialized'] = self.specialized
        options['format'] = self.format
        if self.synth is not None:
            options['synth'] = self.synth
        return options

    def getHash(self):
        """Return the sha256 of the canonical options plus the bytes of every input file.

        Input files enter by content, so moving them does not change the hash.
        """
        inputs = OrderedDict()
        for name,path in self.paths.items():
            if path is not None:
                inputs[name] = _fileHash(path)
        inputs['partitions'] = [_fileHash(path) for path in self.partitions]
        canonical = json.dumps({'options':self.getOptions(),'inputs':inputs},sort_keys=True,
                               separators=(',',':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def getMetadata(self):
        metadata = OrderedDict()
        metadata['tool'] = 'regionflow'
        metadata['version'] = __version__
        metadata['seed'] = int(self.seed)
        metadata['config_hash'] = self.getHash()
        metadata['options'] = self.getOptions()
        return metadata

    def getComment(self):
        """Return the comment line written at the top of CSV artifacts.
        """
        return 'regionflow seed=%i config=%s' % (int(self.seed),self.getHash())

    def getLouvainOptions(self):
        return LouvainOptions(order=self.order,seed=int(self.seed),min_gain=self.min_gain,
                              max_levels=self.max_levels)

def setupLogging(logfile=None):
    """Configure the package logger.

    The console level comes from the REGIONFLOW_LOG environment variable
    (default WARNING).  When logfile is given, INFO and above also go to that
    file without timestamps.  Warnings issued with the warnings module are
    routed through logging.

    :returns:
      List of handlers added (pass to teardownLogging).
    """
    levelname = os.environ.get(LOG_ENV,'WARNING').upper()
    level = getattr(logging,levelname,None)
    if not isinstance(level,int):
        raise RegionFlowException('%s=%s is not a logging level.' % (LOG_ENV,levelname),code='config')
    formatter = logging.Formatter(LOG_FORMAT)
    handlers = []
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(formatter)
    handlers.append(console)
    if logfile is not None:
        filehandler = logging.FileHandler(logfile,mode='w')
        filehandler.setLevel(logging.INFO)
        filehandler.setFormatter(formatter)
        handlers.append(filehandler)
    for name in ['regionflow','py.warnings']:
        logger = logging.getLogger(name)
        logger.setLevel(min(level,logging.INFO) if logfile is not None else level)
        for handler in handlers:
            logger.addHandler(handler)
    logging.captureWarnings(True)
    return handlers

def teardownLogging(handlers):
    for name in ['regionflow','py.warnings']:
        logger = logging.getLogger(name)
        for handler in handlers:
            logger.removeHandler(handler)
    for handler in handlers:
        handler.close()
    logging.captureWarnings(False)
