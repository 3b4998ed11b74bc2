#!/usr/bin/env python

#stdlib imports
from collections import OrderedDict
import logging
import math
import os.path

#third party imports
import numpy as np
import pandas as pd

#local imports
from .dataset import RegionFlowException,saveFrame
from .flows import GENERAL,SPECIALIZED,HospitalRoster,ingestFlows
from .geometry import ZoneAttributes,ZoneGeometry
from .louvain import Partition

ZONE_FORMAT = 'Z%05i'
HOSPITAL_FORMAT = 'H%04i'

logger = logging.getLogger(__name__)

class PlantedSpec(object):
    """Parameters of a planted-region synthetic flow data set.
    """
    def __init__(self,regions=5,zones=10,lam=40.0,leakage=0.1,hospitals=2,seed=0,specialized=0.0):
        """
        :param regions:
          Number of planted regions R.
        :param zones:
          Zones per region Z.
        :param lam:
          Mean admissions per zone (Poisson).
        :param leakage:
          Probability that an admission goes to another region's hospital, 0 <= leakage < 1.
        :param hospitals:
          Hospitals per region H (1 <= H <= Z).
        :param seed:
          Seed of the only random generator used.
        :param specialized:
          Share of admissions flagged as specialized care, 0 <= specialized <= 1.
        :raises RegionFlowException:
          When any field is out of range.
        """
        self.regions = regions
        self.zones = zones
        self.lam = lam
        self.leakage = leakage
        self.hospitals = hospitals
        self.seed = seed
        self.specialized = specialized
        self.validate()

    def validate(self):
        problems = []
        for name in ['regions','zones','hospitals','seed']:
            value = getattr(self,name)
            if isinstance(value,bool) or int(value) != value:
                problems.append('%s must be an integer' % name)
        if not problems:
            if self.regions < 1 or self.zones < 1 or self.regions*self.zones < 2:
                problems.append('regions*zones must be at least 2')
            if self.hospitals < 1 or self.hospitals > self.zones:
                problems.append('hospitals must be between 1 and zones')
            if self.seed < 0:
                problems.append('seed must be nonnegative')
        if not self.lam > 0:
            problems.append('lam must be positive')
        if not (0 <= self.leakage < 1):
            problems.append('leakage must be in [0,1)')
        if not (0 <= self.specialized <= 1):
            problems.append('specialized must be in [0,1]')
        if problems:
            raise RegionFlowException('Invalid planted spec: %s' % '; '.join(problems),
                                      code='invalid_spec',details={'problems':problems})

    def asDict(self):
        return OrderedDict([('regions',int(self.regions)),('zones',int(self.zones)),
                            ('lam',float(self.lam)),('leakage',float(self.leakage)),
                            ('hospitals',int(self.hospitals)),('seed',int(self.seed)),
                            ('specialized',float(self.specialized))])

class PlantedData(object):
    """
    A generated data set: flows, hospitals, zone attributes, geometry and the planted truth.
    """
    def __init__(self,spec,flows,roster,attrs,geoms,truth):
        self.spec = spec
        self.flows = flows
        self.roster = roster
        self.attrs = attrs
        self.geoms = geoms
        self.truth = truth

    def getFlowTable(self,policy=None):
        """Ingest the generated flow records.
        """
        return ingestFlows(self.flows,roster=self.roster,policy=policy,universe=set(self.attrs.getZones()))

    def save(self,outdir,comment=None,metadata=None):
        """Write flows.csv, roster.csv, attrs.csv, truth.csv and geoms.geojson to a folder.

        :returns:
          OrderedDict of artifact name -> file path.
        """
        files = OrderedDict()
        files['flows'] = os.path.join(outdir,'flows.csv')
        files['roster'] = os.path.join(outdir,'roster.csv')
        files['attrs'] = os.path.join(outdir,'attrs.csv')
        files['truth'] = os.path.join(outdir,'truth.csv')
        files['geoms'] = os.path.join(outdir,'geoms.geojson')
        saveFrame(self.flows,files['flows'],comment=comment)
        self.roster.save(files['roster'],comment=comment)
        self.attrs.save(files['attrs'],comment=comment)
        self.truth.save(files['truth'],comment=comment)
        self.geoms.save(files['geoms'],metadata=metadata)
        return files

def _layout(spec):
    """Return (column,row) grid cells for every zone, regions as contiguous blocks.
    """
    width = int(math.ceil(math.sqrt(spec.zones)))
    height = int(math.ceil(spec.zones/float(width)))
    bcols = int(math.ceil(math.sqrt(spec.regions)))
    cells = []
    for region in range(spec.regions):
        bx = (region % bcols)*width
        by = (region // bcols)*height
        for j in range(spec.zones):
            cells.append((bx + j % width,by + j // width))
    return cells

def generatePlanted(spec):
    """Generate a planted-region data set.

    Every zone sends Poisson(lam) admissions.  Each admission goes to a
    uniformly chosen hospital of the zone's own region with probability
    1-leakage, else to a uniformly chosen hospital of a uniformly chosen other
    region.  Hospitals sit in evenly spaced zones of their region; zones are
    unit square cells and every region is a contiguous block of cells.

    :param spec:
      PlantedSpec instance.
    :returns:
      PlantedData instance.
    """
    spec.validate()
    rng = np.random.default_rng(int(spec.seed))
    R = int(spec.regions)
    Z = int(spec.zones)
    H = int(spec.hospitals)
    nzones = R*Z
    zones = [ZONE_FORMAT % (i+1) for i in range(nzones)]
    home = np.repeat(np.arange(R),Z)

    hospitals = [HOSPITAL_FORMAT % (i+1) for i in range(R*H)]
    hzone = []
    for region in range(R):
        for h in range(H):
            hzone.append(zones[region*Z + (h*Z)//H])

    sizes = rng.poisson(spec.lam,size=nzones)
    total = int(sizes.sum())
    patient = np.repeat(np.arange(nzones),sizes)
    leak = rng.random(total) < spec.leakage
    if R > 1:
        offset = rng.integers(1,R,size=total)
    else:
        offset = np.zeros(total,dtype=np.int64)
        leak[:] = False
    region = np.where(leak,(home[patient] + offset) % R,home[patient])
    hospital = region*H + rng.integers(0,H,size=total)
    special = rng.random(total) < spec.specialized
    population = rng.integers(500,5000,size=nzones)

    records = pd.DataFrame({'patient_zone':np.array(zones,dtype=object)[patient],
                            'hospital_id':np.array(hospitals,dtype=object)[hospital],
                            'service_class':np.where(special,SPECIALIZED,GENERAL)})
    flows = records.groupby(['patient_zone','hospital_id','service_class'],sort=True).size()
    flows = flows.reset_index(name='count')[['patient_zone','hospital_id','count','service_class']]

    admissions = flows.groupby('hospital_id')['count'].sum().reindex(hospitals).fillna(0).astype(np.int64)
    roster = HospitalRoster(pd.DataFrame({'hospital_id':hospitals,
                                          'home_zone':hzone,
                                          'is_general':[True]*len(hospitals),
                                          'admissions':admissions.values}))

    cells = _layout(spec)
    attrs = ZoneAttributes(pd.DataFrame({'zone_id':zones,
                                         'population':population,
                                         'centroid_x':[c[0]+0.5 for c in cells],
                                         'centroid_y':[c[1]+0.5 for c in cells]}))
    polygons = OrderedDict()
    for zone,(x,y) in zip(zones,cells):
        x = float(x)
        y = float(y)
        polygons[zone] = [[(x,y),(x+1,y),(x+1,y+1),(x,y+1),(x,y)]]
    geoms = ZoneGeometry(polygons)
    truth = Partition(zones,home)
    logger.info('Generated %i zones, %i hospitals and %i admissions (%i leaked)' %
                (nzones,len(hospitals),total,int(leak.sum())))
    return PlantedData(spec,flows,roster,attrs,geoms,truth)
