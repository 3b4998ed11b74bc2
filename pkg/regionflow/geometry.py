#!/usr/bin/env python

#stdlib imports
from collections import Counter,OrderedDict
import json
import logging
import math
import warnings

#third party imports
import numpy as np
import pandas as pd
from shapely.geometry import Polygon,MultiPolygon,shape,mapping

#local imports
from .dataset import DataSet,RegionFlowException,RegionFlowWarning,saveFrame
from .dartmouth import AdjacencyMap

#literal constant of the perimeter-area corrected ratio (not 2*sqrt(pi))
PAC_CONSTANT = 3.54

logger = logging.getLogger(__name__)

def _checkRing(zone,ring):
    ring = [tuple(float(c) for c in vertex[0:2]) for vertex in ring]
    if len(ring) < 4 or ring[0] != ring[-1]:
        raise RegionFlowException('Zone "%s" has an open or short ring.' % str(zone),
                                  code='bad_geometry',details={'zone':str(zone)})
    if Polygon(ring).area <= 0:
        raise RegionFlowException('Zone "%s" has a zero-area ring.' % str(zone),
                                  code='bad_geometry',details={'zone':str(zone)})
    return ring

def _segmentKey(p,q):
    return (p,q) if p <= q else (q,p)

class ZoneGeometry(object):
    """
    Planar polygons (projected units) per zone id.
    """
    def __init__(self,polygons):
        """Construct a ZoneGeometry.

        :param polygons:
          Dictionary of zone id -> list of polygons, where each polygon is
          either a closed exterior ring (sequence of (x,y) vertices) or a tuple
          of (exterior ring, list of hole rings).  Rings must repeat their first
          vertex at the end.
        :raises RegionFlowException:
          When a ring is open or encloses zero area.
        """
        self._polygons = OrderedDict()
        for zone in sorted(polygons.keys()):
            shapes = []
            for poly in polygons[zone]:
                if isinstance(poly,tuple) and len(poly) == 2 and not np.isscalar(poly[0][0]):
                    exterior,holes = poly
                else:
                    exterior,holes = poly,[]
                exterior = _checkRing(zone,exterior)
                holes = [_checkRing(zone,hole) for hole in holes]
                shapes.append(Polygon(exterior,holes))
            if not len(shapes):
                raise RegionFlowException('Zone "%s" has no polygons.' % str(zone),
                                          code='bad_geometry',details={'zone':str(zone)})
            self._polygons[zone] = shapes
        self._segments = None

    @classmethod
    def loadFromGeoJSON(cls,filename):
        """Load zone polygons from a GeoJSON FeatureCollection.

        Each feature carries the zone id in its 'zone_id' property and a
        Polygon or MultiPolygon geometry in planar coordinates.

        :param filename:
          GeoJSON file name.
        :returns:
          ZoneGeometry instance.
        :raises RegionFlowException:
          When features lack zone_id, repeat a zone, or hold invalid rings.
        """
        with open(filename,'rt') as f:
            try:
                collection = json.load(f)
            except ValueError as error:
                raise RegionFlowException('Could not parse %s: %s' % (filename,str(error)),code='bad_geometry')
        polygons = {}
        for i,feature in enumerate(collection.get('features',[])):
            props = feature.get('properties') or {}
            if 'zone_id' not in props:
                raise RegionFlowException('Feature %i in %s has no zone_id property.' % (i,filename),
                                          code='bad_geometry',details={'index':i})
            zone = str(props['zone_id'])
            if zone in polygons:
                raise RegionFlowException('Zone "%s" appears twice in %s.' % (zone,filename),
                                          code='bad_geometry',details={'zone':zone})
            geometry = feature.get('geometry') or {}
            gtype = geometry.get('type')
            if gtype == 'Polygon':
                rawpolys = [geometry['coordinates']]
            elif gtype == 'MultiPolygon':
                rawpolys = geometry['coordinates']
            else:
                raise RegionFlowException('Zone "%s" has unsupported geometry type %s.' % (zone,gtype),
                                          code='bad_geometry',details={'zone':zone})
            #shapely closes open rings silently, so check the raw rings first
            for rings in rawpolys:
                for ring in rings:
                    _checkRing(zone,ring)
            parsed = shape(geometry)
            if isinstance(parsed,MultiPolygon):
                parts = list(parsed.geoms)
            else:
                parts = [parsed]
            polygons[zone] = [(list(part.exterior.coords),[list(hole.coords) for hole in part.interiors])
                              for part in parts]
        logger.info('Loaded %i zone geometries from %s' % (len(polygons),filename))
        return cls(polygons)

    def __len__(self):
        return len(self._polygons)

    def save(self,filename,metadata=None):
        """Write the zone polygons as a GeoJSON FeatureCollection.
        """
        features = []
        for zone,shapes in self._polygons.items():
            if len(shapes) == 1:
                geometry = mapping(shapes[0])
            else:
                geometry = mapping(MultiPolygon(shapes))
            features.append(OrderedDict([('type','Feature'),
                                         ('properties',{'zone_id':zone}),
                                         ('geometry',geometry)]))
        collection = OrderedDict([('type','FeatureCollection'),('features',features)])
        if metadata is not None:
            collection['metadata'] = metadata
        with open(filename,'wt') as f:
            f.write(json.dumps(collection,sort_keys=True) + '\n')

    def getZones(self):
        return list(self._polygons.keys())

    def hasZone(self,zone):
        return zone in self._polygons

    def getPolygons(self,zone):
        """Return the list of shapely Polygons of a zone.
        """
        if zone not in self._polygons:
            raise RegionFlowException('Zone "%s" has no geometry.' % str(zone),
                                      code='coverage_mismatch',details={'zones':[str(zone)]})
        return list(self._polygons[zone])

    def getArea(self,zone):
        """Return the zone area (holes subtracted).
        """
        return float(sum([poly.area for poly in self.getPolygons(zone)]))

    def getPerimeter(self,zone):
        """Return the total length of all rings of a zone.
        """
        total = 0.0
        for poly in self.getPolygons(zone):
            total += poly.exterior.length
            total += sum([hole.length for hole in poly.interiors])
        return total

    def getVertexMean(self,zone):
        """Return the unweighted mean of the exterior vertices of a zone.
        """
        vertices = []
        for poly in self.getPolygons(zone):
            vertices.extend(list(poly.exterior.coords)[:-1])
        vertices = np.array(vertices,dtype=float)
        return (float(vertices[:,0].mean()),float(vertices[:,1].mean()))

    def getSegments(self,zone):
        """Return a Counter of boundary segments of a zone, keyed by the unordered endpoint pair.
        """
        if self._segments is None:
            self._segments = {}
        if zone not in self._segments:
            counter = Counter()
            for poly in self.getPolygons(zone):
                for ring in [poly.exterior] + list(poly.interiors):
                    coords = list(ring.coords)
                    for p,q in zip(coords[:-1],coords[1:]):
                        if p != q:
                            counter[_segmentKey(p,q)] += 1
            self._segments[zone] = counter
        return self._segments[zone]

def _segmentLength(key):
    (x0,y0),(x1,y1) = key
    return math.hypot(x1-x0,y1-y0)

def dissolve(geoms,p):
    """Merge zone polygons into region perimeters and areas.

    A region's area is the sum of its member zone areas; its perimeter is the
    total length of boundary segments that appear exactly once among the
    member zones' rings.  Shared borders must be represented by coincident
    vertex sequences; matching is by exact coordinates.

    :param geoms:
      ZoneGeometry instance.
    :param p:
      Zone-level Partition.
    :returns:
      pandas DataFrame indexed by region_id with columns perimeter, area.
    :raises RegionFlowException:
      When a partition zone has no geometry.
    """
    zones = p.getNodes()
    missing = [z for z in zones if not geoms.hasZone(z)]
    if len(missing):
        raise RegionFlowException('%i partition zone(s) have no geometry, first is "%s".' % (len(missing),missing[0]),
                                  code='coverage_mismatch',details={'zones':missing})
    labels = p.getLabelsFor(zones)
    ncomm = p.getCommunityCount()
    areas = np.zeros(ncomm)
    counters = [Counter() for i in range(ncomm)]
    for zone,label in zip(zones,labels):
        areas[label] += geoms.getArea(zone)
        counters[label].update(geoms.getSegments(zone))
    perimeters = np.zeros(ncomm)
    for label,counter in enumerate(counters):
        perimeters[label] = sum([_segmentLength(key) for key,count in counter.items() if count == 1])
    return pd.DataFrame({'perimeter':perimeters,'area':areas},
                        index=pd.Index(np.arange(ncomm),name='region_id'))

def compactness(perimeter,area):
    """Return the perimeter-area corrected ratio P/(3.54*sqrt(A)).

    :raises RegionFlowException:
      When the perimeter or area is not positive.
    """
    if not perimeter > 0 or not area > 0:
        raise RegionFlowException('Compactness needs positive perimeter and area (P=%g, A=%g).' % (perimeter,area),
                                  code='bad_geometry')
    return perimeter/(PAC_CONSTANT*math.sqrt(area))

def zoneAdjacency(geoms):
    """Rook contiguity: zones sharing at least one boundary segment are neighbors.

    Touching at a single vertex does not make two zones adjacent.

    :param geoms:
      ZoneGeometry instance.
    :returns:
      AdjacencyMap over all zones of geoms (zones without neighbors are islands).
    """
    owners = {}
    for zone in geoms.getZones():
        for key in geoms.getSegments(zone):
            owners.setdefault(key,set()).add(zone)
    neighbors = {}
    for key,zones in owners.items():
        if len(zones) < 2:
            continue
        for zone in zones:
            neighbors.setdefault(zone,set()).update(zones - set([zone]))
    return AdjacencyMap(neighbors,zones=geoms.getZones())

def weightedCentroid(points):
    """Return the population-weighted mean of a set of points.

    :param points:
      Sequence of (x,y,population) tuples, or a DataFrame with x, y and population columns.
    :returns:
      Tuple of (x,y).
    :raises RegionFlowException:
      When the total population is not positive.
    """
    if isinstance(points,pd.DataFrame):
        xy = points[['x','y']].values.astype(float)
        pop = points['population'].values.astype(float)
    else:
        array = np.array(points,dtype=float).reshape(-1,3)
        xy = array[:,0:2]
        pop = array[:,2]
    if not len(pop) or pop.sum() <= 0:
        raise RegionFlowException('Cannot weight a centroid by zero total population.',code='zero_population')
    x,y = np.average(xy,axis=0,weights=pop)
    return (float(x),float(y))

class BlockPoints(DataSet):
    """
    Census-block style population points, grouped by zone.
    """
    REQFIELDS = ['zone_id','x','y','population']
    def __init__(self,dataframe):
        self.checkColumns(dataframe,self.REQFIELDS,'Block point table')
        df = dataframe[self.REQFIELDS].copy()
        df['zone_id'] = df['zone_id'].astype(str).str.strip()
        for col in ['x','y','population']:
            df[col] = pd.to_numeric(df[col],errors='coerce')
        bad = df[['x','y','population']].isnull().any(axis=1) | (df['population'] < 0)
        if bad.any():
            idx = int(np.flatnonzero(bad.values)[0])
            raise RegionFlowException('Block point row %i is invalid.' % idx,
                                      code='malformed_record',details={'index':idx})
        self._dataframe = df.sort_values(['zone_id','x','y'],kind='mergesort').reset_index(drop=True)

    @classmethod
    def loadFromCSV(cls,csvfile):
        """Load block points from a CSV file with columns zone_id,x,y,population.
        """
        return cls(pd.read_csv(csvfile,dtype=str,keep_default_na=False,comment='#'))

    def getData(self,getCopy=False):
        if getCopy:
            return self._dataframe.copy()
        return self._dataframe

    def save(self,filename,comment=None):
        saveFrame(self._dataframe,filename,comment=comment)

    def getCentroid(self,zone):
        """Return the population-weighted centroid of the points in a zone.

        :raises RegionFlowException:
          When the zone has no points or zero total population.
        """
        df = self._dataframe
        return weightedCentroid(df[df['zone_id'] == zone])

class ZoneAttributes(DataSet):
    """
    Zone universe with population and (optionally) centroid coordinates.
    """
    REQFIELDS = ['zone_id','population']
    def __init__(self,dataframe):
        """Construct ZoneAttributes from a pandas DataFrame.

        :param dataframe:
          pandas DataFrame with columns zone_id and population, and optionally
          centroid_x and centroid_y (blank where unknown).
        :raises RegionFlowException:
          When columns are missing, zone ids repeat or values cannot be parsed.
        """
        self.checkColumns(dataframe,self.REQFIELDS,'Zone attribute table')
        df = dataframe.copy()
        df['zone_id'] = df['zone_id'].astype(str).str.strip()
        dups = df['zone_id'][df['zone_id'].duplicated()].unique().tolist()
        if len(dups):
            raise RegionFlowException('Zone ids must be unique: %s' % str(dups),
                                      code='malformed_record',details={'zones':dups})
        population = pd.to_numeric(df['population'],errors='coerce')
        if population.isnull().any() or (population < 0).any():
            idx = int(np.flatnonzero((population.isnull() | (population < 0)).values)[0])
            raise RegionFlowException('Zone attribute row %i has an invalid population.' % idx,
                                      code='malformed_record',details={'index':idx})
        df['population'] = population.astype(float)
        for col in ['centroid_x','centroid_y']:
            if col not in df.columns:
                df[col] = np.nan
            df[col] = pd.to_numeric(df[col],errors='coerce')
        self._dataframe = df[['zone_id','population','centroid_x','centroid_y']].sort_values('zone_id').reset_index(drop=True)

    @classmethod
    def loadFromCSV(cls,csvfile):
        """Load zone attributes from a CSV file with columns zone_id,population[,centroid_x,centroid_y].
        """
        return cls(pd.read_csv(csvfile,dtype=str,keep_default_na=False,comment='#'))

    def getData(self,getCopy=False):
        if getCopy:
            return self._dataframe.copy()
        return self._dataframe

    def save(self,filename,comment=None):
        saveFrame(self._dataframe,filename,comment=comment)

    def getZones(self):
        return self._dataframe['zone_id'].tolist()

    def getPopulation(self):
        """Return a pandas Series of population indexed by zone id.
        """
        df = self._dataframe
        return pd.Series(df['population'].values,index=df['zone_id'].values)

    def getCentroids(self):
        """Return a dictionary of zone id -> (x,y) for zones with known centroids.
        """
        df = self._dataframe
        known = df.dropna(subset=['centroid_x','centroid_y'])
        return OrderedDict([(z,(float(x),float(y))) for z,x,y in
                            zip(known['zone_id'],known['centroid_x'],known['centroid_y'])])

    def checkCoverage(self,zones):
        """Make sure every zone in a sequence has an attribute row.

        :raises RegionFlowException:
          When zones are missing (details list them).
        """
        missing = sorted(set(zones) - set(self._dataframe['zone_id']))
        if len(missing):
            raise RegionFlowException('Zone attributes missing for %i zone(s): %s' % (len(missing),str(missing[0:10])),
                                      code='coverage_mismatch',details={'zones':missing})

    def fillCentroids(self,blocks=None,geoms=None):
        """Fill unknown centroids from block points, else from zone geometry.

        Block points give population-weighted centroids.  A zone whose block
        population is zero (or that has no block points) falls back to the
        unweighted mean of its polygon vertices, with a warning.

        :param blocks:
          BlockPoints instance or None.
        :param geoms:
          ZoneGeometry instance or None.
        :returns:
          Tuple of (new ZoneAttributes, list of zones that used the vertex-mean fallback).
        """
        df = self._dataframe.copy()
        fallback = []
        for i,zone in enumerate(df['zone_id']):
            if not (np.isnan(df.at[i,'centroid_x']) or np.isnan(df.at[i,'centroid_y'])):
                continue
            xy = None
            if blocks is not None:
                try:
                    xy = blocks.getCentroid(zone)
                except RegionFlowException:
                    xy = None
            if xy is None and geoms is not None and geoms.hasZone(zone):
                xy = geoms.getVertexMean(zone)
                fallback.append(zone)
            if xy is not None:
                df.at[i,'centroid_x'] = xy[0]
                df.at[i,'centroid_y'] = xy[1]
        if len(fallback):
            warnings.warn(RegionFlowWarning('%i zone(s) use unweighted vertex-mean centroids: %s' %
                                            (len(fallback),str(fallback[0:10]))))
        return ZoneAttributes(df),fallback
